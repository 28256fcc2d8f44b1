//! Exit codes and outputs of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greedy-approx"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn constants_table_for_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--basis", "canonical:2:4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["K", "D", "Ds", "Cq", "Cg"] {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn missing_basis_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--basis-file", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn tiny_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--basis", "summing:6", "--budget", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn corrupt_basis_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Singular matrix: no biorthogonal dual exists.
    let text = r#"{"dim":2,"field":"real","norm":{"kind":"weightedLq","q":2,"weights":[1,1]},"matrix":[1,1,1,1]}"#;
    std::fs::write(dir.path().join("bad.json"), text).unwrap();
    let o = run(&["verify", "--basis-file", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("report.json").exists());
    std::fs::write(dir.path().join("junk.json"), "{not json").unwrap();
    assert_eq!(run(&["constants", "--basis-file", "junk.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn unknown_basis_id_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["constants", "--basis", "hilbert:4"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["bogus"], dir.path()).status.code(), Some(1));
}

#[test]
fn tga_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tga", "--basis", "canonical:2:4", "--f", "4,3,2,1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# pi = 1 2 3 4\n"));
    let row: Vec<&str> = text.lines().find(|l| l.starts_with("2,")).unwrap().split(',').collect();
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    assert!((num(2) - 5f64.sqrt()).abs() < 1e-12);
    assert!((num(3) - 5f64.sqrt()).abs() < 1e-9);
    assert!((num(4) - 6f64.sqrt()).abs() < 1e-9);

    let o = run(&["tga", "--basis", "summing:3", "--f", "0,0,0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines().skip(2) {
        assert_eq!(line.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }

    let o = run(&["tga", "--basis", "canonical:2:4", "--f", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn complex_tga() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["tga", "--basis", "canonical:2:3", "--field", "complex", "--f", "1+2i,-1,0.5i"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("# pi = 1 2 3\n"));
}

#[test]
fn verify_is_deterministic_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let o = run(&["verify", "--basis", "summing:4", "--seed", "7", "--out", name], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["schemaVersion"], 1);
    assert_eq!(report["seed"], 7);

    let o = run(&["report-diff", "a.json", "b.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));

    let o = run(&["verify", "--basis", "summing:4", "--seed", "8", "--out", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["report-diff", "a.json", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("seed"));

    let o = run(&["verify", "--basis", "canonical:1:3", "--format", "csv", "--out", "d.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = std::fs::read_to_string(dir.path().join("d.rows.csv")).unwrap();
    assert!(rows.starts_with("element,m,residual,sigma,rho,varrho,bestProjection"));
    assert!(dir.path().join("d.estimates.csv").exists());
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"basis":"summing:3","corpus":{"seed":3,"random":{"count":20}},"output":"cfg.json"}"#;
    std::fs::write(dir.path().join("run.json"), cfg).unwrap();
    let o = run(&["verify", "--config", "run.json", "--seed", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("cfg.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["config"]["random"]["count"], 20);

    std::fs::write(dir.path().join("typo.json"), r#"{"basis":"summing:3","seeed":1}"#).unwrap();
    assert_eq!(run(&["verify", "--config", "typo.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn basis_file_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"dim":3,"field":"real","norm":{"kind":"weightedLq","q":1,"weights":[1,1,1]},"matrix":[1,1,0,0,1,1,0,0,1]}"#;
    std::fs::write(dir.path().join("b.json"), text).unwrap();
    let o = run(&["constants", "--basis-file", "b.json", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 14);
}
