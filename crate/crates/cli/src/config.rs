//! Parameter files, `--set` overrides and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

/// Reads a JSON parameter file. A manifest written by an earlier run is
/// accepted too; its `config` object is used.
pub fn read_params(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    Ok(match value {
        Value::Object(mut map) if map.get("tool").and_then(Value::as_str) == Some(TOOL) => {
            map.remove("config").unwrap_or(Value::Object(Map::new()))
        }
        other => other,
    })
}

/// Inputs recorded in a manifest, if `path` is one.
pub fn manifest_inputs(path: &Path) -> Option<Map<String, Value>> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path).ok()?).ok()?;
    match value.get("tool").and_then(Value::as_str) {
        Some(TOOL) => value.get("inputs")?.as_object().cloned(),
        _ => None,
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key=value` pairs to a config object. Keys must already exist in
/// the serialized config; values are parsed as JSON and fall back to strings.
pub fn apply_overrides(target: &mut Map<String, Value>, pairs: &[String]) -> Result<(), Failure> {
    for pair in pairs {
        let (key, raw) =
            pair.split_once('=').ok_or_else(|| Failure::invalid(format!("override {pair:?} is not key=value")))?;
        if !target.contains_key(key) {
            let known: Vec<&str> = target.keys().map(String::as_str).collect();
            return Err(Failure::invalid(format!("unknown key {key:?}; known keys: {}", known.join(", "))));
        }
        target.insert(key.to_string(), parse_value(raw));
    }
    Ok(())
}

/// Resolves a config: defaults, then the parameter file, then `--set`
/// overrides, then explicit flags. Unknown keys are rejected at every step.
pub fn resolve<T>(params: Option<&Path>, overrides: &[String], flags: Vec<(&str, Value)>) -> Result<T, Failure>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut config = match params {
        Some(path) => from_value::<T>(read_params(path)?)?,
        None => T::default(),
    };
    let mut map = match serde_json::to_value(&config).expect("configs serialize") {
        Value::Object(map) => map,
        _ => unreachable!("configs are JSON objects"),
    };
    apply_overrides(&mut map, overrides)?;
    for (key, value) in flags {
        map.insert(key.to_string(), value);
    }
    config = from_value(Value::Object(map))?;
    Ok(config)
}

pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::invalid(format!("invalid parameters: {e}")))
}

pub const TOOL: &str = "nodebound";

/// Collects output files and writes them, in order, under one directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::invalid(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, subcommand: &str, config: &impl Serialize, inputs: Option<Value>) -> Result<(), Failure> {
        let mut manifest = Map::new();
        manifest.insert("tool".into(), TOOL.into());
        manifest.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        manifest.insert("subcommand".into(), subcommand.into());
        manifest.insert("config".into(), serde_json::to_value(config).expect("configs serialize"));
        if let Some(inputs) = inputs {
            manifest.insert("inputs".into(), inputs);
        }
        let mut outputs = std::mem::take(&mut self.files);
        outputs.push("manifest.json".into());
        manifest.insert("outputs".into(), outputs.into());
        self.write_json("manifest.json", &Value::Object(manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Demo {
        a: f64,
        tags: Vec<usize>,
        name: String,
    }

    #[test]
    fn overrides_parse_json_and_fall_back_to_strings() {
        let sets = vec!["a=0.5".to_string(), "tags=[1,2]".to_string(), "name=abc".to_string()];
        let demo: Demo = resolve(None, &sets, Vec::new()).unwrap();
        assert_eq!(demo, Demo { a: 0.5, tags: vec![1, 2], name: "abc".into() });
    }

    #[test]
    fn unknown_override_keys_are_rejected() {
        let err = resolve::<Demo>(None, &["b=1".to_string()], Vec::new()).unwrap_err();
        assert!(err.message.contains("unknown key \"b\""), "{}", err.message);
        assert!(resolve::<Demo>(None, &["a".to_string()], Vec::new()).is_err());
    }

    #[test]
    fn flags_win_over_overrides() {
        let demo: Demo = resolve(None, &["a=1".to_string()], vec![("a", 2.0.into())]).unwrap();
        assert_eq!(demo.a, 2.0);
    }
}
