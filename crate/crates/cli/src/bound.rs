//! The `bound` subcommand: one bound per parameter file.

use nodebound::bounds::{
    covering_bound_bv, covering_bound_monotone, generalization_bound, marion_bound, ncde_bound, rademacher_bound,
    solution_norm_bound, ComplexityParams, GenBoundParams, MarionParams, NcdeParams, RadiusCondition,
    SolutionBoundParams,
};
use nodebound::BoundError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringParams {
    /// Interval length `L`.
    pub l: f64,
    /// Range bound `V`.
    pub v: f64,
    pub tau: f64,
    /// Output dimension; `monotone` requires 1.
    #[serde(default = "one")]
    pub d: usize,
    /// `monotone` or `bv`.
    #[serde(default)]
    pub class: CoveringClass,
    #[serde(default)]
    pub condition: RadiusCondition,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringClass {
    Monotone,
    #[default]
    Bv,
}

/// Contents of a `bound` parameter file: a single key naming the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundParams {
    SolutionNorm(SolutionBoundParams),
    Covering(CoveringParams),
    Rademacher(ComplexityParams),
    Generalization(GenBoundParams),
    Marion(MarionParams),
    Ncde(NcdeParams),
}

/// Greek names of parameters whose ASCII spelling differs.
fn symbol(name: &str) -> Option<&'static str> {
    Some(match name {
        "delta" => "δ",
        "mu" => "μ",
        "tau" => "τ",
        "l_sigma" => "L_σ",
        _ => return None,
    })
}

fn failure(e: BoundError) -> Failure {
    let message = match &e {
        BoundError::InvalidParameter { name, .. } => match symbol(name) {
            Some(sym) => format!("{sym} ({e})"),
            None => e.to_string(),
        },
        _ => e.to_string(),
    };
    Failure::invalid(message)
}

pub struct Evaluated {
    pub json: Value,
    pub table: String,
}

fn scalar(name: &str, fields: &[(&str, f64)]) -> Evaluated {
    let mut table = format!("{name} bound\n");
    let mut map = serde_json::Map::new();
    map.insert("bound".into(), name.into());
    for &(k, v) in fields {
        table += &format!("  {k:<24} {v:>18.10e}\n");
        map.insert(k.into(), json!(v));
    }
    Evaluated { json: Value::Object(map), table }
}

pub fn evaluate(params: &BoundParams) -> Result<Evaluated, Failure> {
    let report = match params {
        BoundParams::SolutionNorm(p) => {
            return Ok(scalar("solution_norm", &[("value", solution_norm_bound(p).map_err(failure)?)]));
        }
        BoundParams::Covering(p) => {
            let c = match p.class {
                CoveringClass::Monotone if p.d != 1 => {
                    return Err(Failure::invalid(format!("monotone covering needs d = 1, got {}", p.d)));
                }
                CoveringClass::Monotone => covering_bound_monotone(p.l, p.v, p.tau, p.condition),
                CoveringClass::Bv => covering_bound_bv(p.l, p.v, p.tau, p.d, p.condition),
            }
            .map_err(failure)?;
            return Ok(scalar("covering", &[("value", c.value), ("log2", c.log2)]));
        }
        BoundParams::Rademacher(p) => {
            let r = rademacher_bound(p).map_err(failure)?;
            return Ok(scalar(
                "rademacher",
                &[("value", r.value), ("epsilon_star", r.epsilon_star), ("c", r.c), ("min_b", r.min_b)],
            ));
        }
        BoundParams::Generalization(p) => generalization_bound(p),
        BoundParams::Marion(p) => marion_bound(p),
        BoundParams::Ncde(p) => ncde_bound(p),
    }
    .map_err(failure)?;
    Ok(Evaluated { json: serde_json::to_value(&report).expect("reports serialize"), table: report.to_table() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> BoundParams {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn generalization_file_round_trips() {
        let p = parse(
            r#"{"generalization": {"empirical_risk": 0.1, "mu": 1, "loss_bound": 1, "delta": 0.05,
                "horizon": 1, "v": 1, "d": 1, "n": 100, "b": 1}}"#,
        );
        let out = evaluate(&p).unwrap();
        assert_eq!(out.json["bound"], "generalization");
        assert!(out.table.contains("total"));
    }

    #[test]
    fn invalid_delta_is_named() {
        let p = parse(
            r#"{"generalization": {"empirical_risk": 0.1, "mu": 1, "loss_bound": 1, "delta": 1.5,
                "horizon": 1, "v": 1, "d": 1, "n": 100}}"#,
        );
        let err = evaluate(&p).err().unwrap();
        assert!(err.message.contains("δ") && err.message.contains("delta"), "{}", err.message);
        assert_eq!(err.code, 1);
    }

    #[test]
    fn covering_defaults_to_the_bv_class() {
        let out = evaluate(&parse(r#"{"covering": {"l": 1, "v": 1, "tau": 0.5}}"#)).unwrap();
        let half = covering_bound_monotone(1.0, 1.0, 0.25, RadiusCondition::Enforce).unwrap().value;
        assert_eq!(out.json["value"].as_f64().unwrap(), half * half);
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(serde_json::from_str::<BoundParams>(r#"{"covering": {"l": 1, "v": 1, "tau": 0.5, "x": 1}}"#).is_err());
        assert!(serde_json::from_str::<BoundParams>(r#"{"mystery": {}}"#).is_err());
    }
}
