use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nodebound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodebound")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let m = manifest(dir);
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let name = f.as_str().unwrap().to_string();
            let bytes = fs::read(dir.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}

fn assert_manifest_is_complete(dir: &Path) {
    let mut listed: Vec<String> = read_outputs(dir).into_iter().map(|(n, _)| n).collect();
    let mut present: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
}

fn write_params(dir: &Path, text: &str) -> String {
    let path = dir.join("p.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const GEN_PARAMS: &str = r#"{"generalization": {"empirical_risk": 0.1, "mu": 1, "loss_bound": 1, "delta": 0.05,
    "horizon": 1, "v": 1, "d": 1, "n": 100, "b": 1}}"#;

#[test]
fn bound_writes_a_report_and_reproduces_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let params = write_params(tmp.path(), GEN_PARAMS);
    let a = tmp.path().join("a");
    let o = nodebound(&["bound", "--params", &params, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("generalization bound"));
    let report: Value = serde_json::from_str(&fs::read_to_string(a.join("bound_report.json")).unwrap()).unwrap();
    assert_eq!(report["bound"], "generalization");
    assert!(report["total"].as_f64().unwrap() > 0.1);
    assert_manifest_is_complete(&a);

    let b = tmp.path().join("b");
    let again = nodebound(&["bound", "--params", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(read_outputs(&a), read_outputs(&b));
}

#[test]
fn bound_rejects_an_invalid_delta_by_name() {
    let tmp = TempDir::new().unwrap();
    let params = write_params(tmp.path(), &GEN_PARAMS.replace("0.05", "1.5"));
    let o = nodebound(&["bound", "--params", &params, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("δ"), "{}", stderr(&o));
}

#[test]
fn bound_overrides_apply_to_the_parameter_object() {
    let tmp = TempDir::new().unwrap();
    let params = write_params(tmp.path(), GEN_PARAMS);
    let out = tmp.path().join("o");
    let o = nodebound(&["bound", "--params", &params, "--out", out.to_str().unwrap(), "--set", "delta=2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nodebound(&["bound", "--params", &params, "--out", out.to_str().unwrap(), "--set", "gamma=2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_print_usage_and_exit_one() {
    let o = nodebound(&["sweep-lambda", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(nodebound(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nodebound(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_nodebound"))
        .args(["bound"])
        .env("NODEBOUND_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NODEBOUND_THREADS"));
}

#[test]
fn verify_passes_on_this_build() {
    let tmp = TempDir::new().unwrap();
    let o = nodebound(&["verify", "--out", tmp.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 10, "{stdout}");
    assert_manifest_is_complete(tmp.path());
}

#[test]
fn sweep_lambda_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let args = ["sweep-lambda", "--lambdas", "0,0.01,0.1,1", "--trials", "20", "--seed", "7"];
        let o = nodebound(&[&args[..], &["--out", out.to_str().unwrap()]].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_manifest_is_complete(&a);
    let files = read_outputs(&a);
    assert_eq!(files, read_outputs(&b));
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["records.csv", "sweep.csv", "summary_lambda.csv", "lambda_box.svg", "manifest.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    let m = manifest(&a);
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["trials"], 20);
    assert_eq!(m["subcommand"], "sweep-lambda");
}

#[test]
fn train_reproduces_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let o = nodebound(&["train", "--out", a.to_str().unwrap(), "--seed", "3", "--set", "epochs=4", "--set", "data=sin"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let record = fs::read_to_string(a.join("record.csv")).unwrap();
    assert_eq!(record.lines().count(), 5);
    let model: Value = serde_json::from_str(&fs::read_to_string(a.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["dims"][0], 2);
    let b = tmp.path().join("b");
    let o = nodebound(&["train", "--params", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_outputs(&a), read_outputs(&b));
}

#[test]
fn sweep_width_writes_every_declared_output() {
    let tmp = TempDir::new().unwrap();
    let o = nodebound(&[
        "sweep-width",
        "--widths",
        "4,8",
        "--trials",
        "2",
        "--set",
        "epochs=3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_manifest_is_complete(tmp.path());
    assert!(fs::read_to_string(tmp.path().join("width_scatter.svg")).unwrap().starts_with("<svg"));
    assert_eq!(manifest(tmp.path())["config"]["widths"], serde_json::json!([4, 8]));
}

#[test]
fn lip_gap_falls_back_to_blobs() {
    let tmp = TempDir::new().unwrap();
    let o = nodebound(&[
        "lip-gap",
        "--set",
        "n_train=100",
        "--set",
        "n_test=50",
        "--set",
        "hidden=8",
        "--set",
        "epochs=3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("Gaussian-blob"));
    assert_manifest_is_complete(tmp.path());
    assert_eq!(fs::read_to_string(tmp.path().join("lip_gap.csv")).unwrap().lines().count(), 4);
}

#[test]
fn lip_gap_reads_idx_files() {
    let tmp = TempDir::new().unwrap();
    let n = 30u32;
    let mut images = vec![0, 0, 8, 3];
    images.extend(n.to_be_bytes());
    images.extend(2u32.to_be_bytes());
    images.extend(2u32.to_be_bytes());
    let mut labels = vec![0, 0, 8, 1];
    labels.extend(n.to_be_bytes());
    for i in 0..n {
        let class = (i % 2) as u8;
        images.extend([class * 200, 10, 20, 255 - class * 200]);
        labels.push(class);
    }
    let (ip, lp) = (tmp.path().join("img.idx"), tmp.path().join("lbl.idx"));
    fs::write(&ip, images).unwrap();
    fs::write(&lp, labels).unwrap();
    let out = tmp.path().join("o");
    let o = nodebound(&[
        "lip-gap",
        "--images",
        ip.to_str().unwrap(),
        "--labels",
        lp.to_str().unwrap(),
        "--set",
        "n_train=20",
        "--set",
        "n_test=10",
        "--set",
        "batch_size=0",
        "--set",
        "epochs=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&out)["inputs"]["images"], ip.to_str().unwrap());
}
