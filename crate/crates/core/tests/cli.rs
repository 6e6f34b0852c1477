use std::path::Path;
use std::process::{Command, Output};

use ode_recon::{generate_pendulum_data, Dataset};

const BIN: &str = env!("CARGO_BIN_EXE_ode-recon");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn gen_pendulum_defaults_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen-pendulum", "-o", "p.csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 50);
    assert_eq!(lines[0], "t,theta1,theta2");
    assert_eq!(lines[1], "0.0,1.0,0.0");
    assert!(lines.iter().all(|l| l.split(',').count() == 3));

    let loaded = Dataset::load(dir.path().join("p.csv")).unwrap();
    let (a, b) = generate_pendulum_data(0.25, 2.0, 9.81, [1.0, 0.0], 10.0, 49).unwrap();
    assert_eq!(loaded.components, vec![a, b]);
}

#[test]
fn reconstruct_then_verify_gives_five_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["gen-pendulum", "-o", "p.csv"]).status.success());
    let out = run(
        dir.path(),
        &["reconstruct", "p.csv", "--degree", "4", "--truncation", "62", "--threshold", "5", "-o", "m.json", "--report", "r.txt"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("r.txt")).unwrap();
    assert!(report.contains("#total = 25   (max. deg. 4)"));
    assert!(report.contains("m = 15 monomial(s)      5.00 "));

    let out = run(dir.path(), &["verify", "m.json", "p.csv", "-o", "cmp.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap(), "t,theta1,theta2,theta1_model,theta2_model");
    assert!(cmp.lines().all(|l| l.split(',').count() == 5));
    assert_eq!(cmp.lines().count(), 50);
}

#[test]
fn config_file_and_flags_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["gen-pendulum", "-o", "p.csv"]).status.success());
    std::fs::write(
        dir.path().join("run.toml"),
        "max_degree = 4\ncheb_truncation = 62\nthreshold_pct = 5.0\n",
    )
    .unwrap();
    let a = run(dir.path(), &["reconstruct", "p.csv", "--config", "run.toml", "-o", "a.json"]);
    let b = run(dir.path(), &["reconstruct", "p.csv", "--degree", "4", "--truncation", "62", "--threshold", "5", "-o", "b.json"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let ja = std::fs::read(dir.path().join("a.json")).unwrap();
    let jb = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn approx_table_has_value_and_derivative_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["gen-pendulum", "-o", "p.csv"]).status.success());
    let out = run(dir.path(), &["approx", "p.csv", "--truncation", "62", "--points", "11"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,theta1,theta1_deriv,theta2,theta2_deriv");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn refine_prints_iteration_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/hare_lynx.csv");
    let out = run(
        dir.path(),
        &["reconstruct", data, "--degree", "2", "--no-constant", "--truncation", "11", "--grid-size", "150", "-o", "m.json"],
    );
    assert!(out.status.success());
    let out = run(dir.path(), &["refine", "m.json", data, "-o", "r.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("It       Normf"));
    assert!(table.contains("Incompatibility factor kappa"));
    assert!(table.contains("Student t(32)"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["coeffs"].as_array().unwrap().len(), 10);
}

#[test]
fn failures_are_stage_labelled() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "t,y\n0,1\n0,2\n").unwrap();
    let out = run(dir.path(), &["reconstruct", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: load dataset:"));

    std::fs::write(dir.path().join("ok.csv"), "t,y\n0,1\n1,2\n2,3\n").unwrap();
    let out = run(dir.path(), &["reconstruct", "ok.csv", "--degree", "4", "--grid-size", "3", "--nodes", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: least squares:"));

    let out = run(dir.path(), &["verify", "missing.json", "ok.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: load model:"));
}
