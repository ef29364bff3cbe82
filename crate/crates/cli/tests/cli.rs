use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn czfault(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_czfault"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn enumerate_full_adder_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = czfault(&["enumerate", "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(&dir.path().join("faults_summary.json"));
    assert_eq!(summary["cz_count"], 15);
    assert_eq!(summary["pulse_faults"], 75);
    assert_eq!(summary["total_faults"], 90);

    let csv = std::fs::read_to_string(dir.path().join("faults.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 90);

    let meta = read_json(&dir.path().join("faults.csv.meta.json"));
    assert_eq!(meta["command"], "enumerate");
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn random_circuit_config_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"circuit": {"kind": "random", "seed": 1, "width": 4, "n_cz": 9}}"#).unwrap();
    let out = czfault(&["enumerate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("faults_summary.json"));
    assert_eq!(summary["cz_count"], 9);
    assert_eq!(summary["total_faults"], 54);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"pulse": {"familly": "cosine"}}"#).unwrap();
    let out = czfault(&["enumerate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(!dir.path().join("faults.csv").exists());
}

#[test]
fn non_fourier_family_cannot_enumerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"pulse": {"family": "cosine"}}"#).unwrap();
    let out = czfault(&["enumerate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Fourier"));
}
