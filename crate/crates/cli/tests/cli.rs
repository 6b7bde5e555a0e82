use std::path::Path;
use std::process::{Command, Output};

use orpool_core::domain::Instance;

fn orpool(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orpool"))
        .args(args)
        .current_dir(dir)
        .env_remove("ORPOOL_SOLVER")
        .output()
        .expect("binary runs")
}

fn generate_small(dir: &Path) {
    let out = orpool(
        dir,
        &["generate", "--weeks", "2", "--specialties", "2", "--patients-per-week", "3", "-o", "inst.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(orpool(dir.path(), &["generate"]).status.code(), Some(2));
    assert_eq!(orpool(dir.path(), &["solve", "--instance", "x.json"]).status.code(), Some(2));
    assert_eq!(orpool(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = orpool(dir.path(), &["solve", "--instance", "missing.json", "-o", "out.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = orpool(dir.path(), &["generate", "--weeks", "9", "-o", "inst.json"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!dir.path().join("inst.json").exists());
}

#[test]
fn generated_instance_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path());
    let text = std::fs::read_to_string(dir.path().join("inst.json")).unwrap();
    let inst = Instance::from_json(&text).unwrap();
    assert_eq!(inst.check(), Ok(()));
    assert_eq!(inst.patients.len(), 6);
    assert_eq!(inst.specialty_count(), 2);
}

#[test]
fn solve_artifact_carries_its_config() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path());
    let out = orpool(
        dir.path(),
        &["solve", "--instance", "inst.json", "--count", "3", "--seed", "7", "-o", "solve.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("solve.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["tool"], "orpool");
    assert_eq!(v["command"], "solve");
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["count"], 3);
    assert!(v["result"]["solution"].is_object());
}

#[test]
fn csv_outputs_get_a_config_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path());
    let out = orpool(
        dir.path(),
        &["compare", "--instance", "inst.json", "--count", "2", "--policies", "0,1", "-o", "cmp.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let sidecar = std::fs::read_to_string(dir.path().join("cmp.csv.config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(v["command"], "compare");
}
