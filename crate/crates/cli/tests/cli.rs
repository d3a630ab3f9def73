use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaincalc"))
        .current_dir(dir)
        .env("CHAINCALC_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn error_code(o: &Output) -> String {
    let v: Value = serde_json::from_slice(&o.stderr).expect("error report is JSON");
    v["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn koch_winding_about_centroid_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["run", "domain", "--kind", "koch", "--level", "4", "--out", "koch_L4.json"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["terms"], 3 * 4usize.pow(4));
    let o = run(dir.path(), &["run", "winding", "--chain", "koch_L4.json", "--z", "centroid", "--expect", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!((v["value_re"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["meta"]["command"], "winding");
    assert_eq!(v["meta"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn cauchy_of_entire_function_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["domain", "--kind", "circle", "--level", "5", "--out", "loop.json"]).status.success());
    let o = run(dir.path(), &["run", "cauchy", "--f", "exp", "--chain", "loop.json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["value_re"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["value_im"].as_f64().unwrap().abs() < 1e-12);
    let o = run(dir.path(), &["cauchy", "--f", "exp", "--chain", "loop.json", "--z", "0.2,0.1"]);
    let v = json(&o);
    let exact = 0.2f64.exp() * 0.1f64.cos();
    assert!((v["value_re"].as_f64().unwrap() - exact).abs() <= v["error_estimate"].as_f64().unwrap());
}

#[test]
fn norm_bracket_of_dipole_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let dipole = r#"{"dim":2,"grade":1,"terms":[
        {"point":[0.0,0.0],"alpha":{"0":1.0},"markers":[]},
        {"point":[0.05,0.0],"alpha":{"0":-1.0},"markers":[]}]}"#;
    std::fs::write(dir.path().join("dipole.json"), dipole).unwrap();
    let o = run(dir.path(), &["run", "norm-estimate", "--chain", "dipole.json", "--order", "1"]);
    assert!(o.status.success());
    let v = json(&o);
    let (lo, hi) = (v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(lo <= hi && lo > 0.9 * hi, "{lo} {hi}");
}

#[test]
fn residue_and_stokes_checks() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["domain", "--kind", "circle", "--level", "6", "--out", "c.json"]).status.success());
    std::fs::write(dir.path().join("poles.json"), r#"[{"at":[0.2,0.1],"radius":0.2,"coefficient":[0.0,1.0]}]"#).unwrap();
    let v = json(&run(dir.path(), &["residue", "--chain", "c.json", "--poles", "poles.json", "--f", "sin"]));
    assert!((v["value_re"].as_f64().unwrap() + std::f64::consts::TAU).abs() < 1e-6, "{v}");
    assert!(run(dir.path(), &["domain", "--kind", "cube", "--dim", "3", "--level", "2", "--out", "cube.json"]).status.success());
    let o = run(dir.path(), &["stokes-check", "--chain", "cube.json", "--form", "sin"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["passed"], true);
}

#[test]
fn asymptotic_cycle_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["asymptotic-cycle", "--field", "golden", "--p", "0.1,0.2", "--T", "20", "--step", "0.01", "--checkpoints", "4"];
    let a = run(dir.path(), &args);
    let b = run(dir.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[3][0], "20.0");
    assert!(text.starts_with("# meta {"));
}

#[test]
fn measure_chain_reports_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(dir.path(), &["measure-chain", "--field", "free", "--grid", "32", "--chain-out", "xi.json"]));
    assert_eq!(v["invariant"], true);
    assert!(dir.path().join("xi.json").exists());
    let v = json(&run(dir.path(), &["measure-chain", "--field", "compressible", "--grid", "32"]));
    assert_eq!(v["invariant"], false);
}

#[test]
fn density_of_koch_interior() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["domain", "--kind", "koch", "--level", "3", "--polyhedral", "--out", "k.json"]).status.success());
    let v = json(&run(dir.path(), &["density", "--chain", "k.json", "--z", "0.47,0.33"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let v = json(&run(dir.path(), &["density", "--chain", "k.json", "--z", "2.0,2.0"]));
    assert!(v["value"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn selftests_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["passed"], true);
    let o = run(dir.path(), &["winding", "--selftest"]);
    assert!(o.status.success());
    assert!(json(&o)["checks"].as_array().unwrap().iter().all(|c| c["module"] == "complex"));
}

#[test]
fn failures_carry_codes_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["cauchy", "--f", "nope", "--chain", "x.json"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_code(&o), "E_UNKNOWN_NAME");
    let o = run(dir.path(), &["cauchy", "--chain", "x.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_code(&o), "E_IO");
    let o = run(dir.path(), &["winding"]);
    assert_eq!(error_code(&o), "E_MISSING_ARGUMENT");
    assert!(run(dir.path(), &["domain", "--kind", "circle", "--out", "c.json"]).status.success());
    let o = run(dir.path(), &["winding", "--chain", "c.json", "--z", "0,0", "--expect", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_code(&o), "E_CHECK_FAILED");
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    let o = run(dir.path(), &["winding", "--chain", "bad.json"]);
    assert_eq!(error_code(&o), "E_PARSE");
}
