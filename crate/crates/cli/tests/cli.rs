use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn glefield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glefield"))
        .args(args)
        .current_dir(dir)
        .env_remove("GLEFIELD_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = "[sampler]\nn = 512\nensemble = 6\nseed = 3\n[field]\nN = 16\nnx = 15\ntail_budget = 0.1\n";

#[test]
fn verify_reports_variance_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = glefield(dir.path(), &["verify", "--k-list", "1,10,100", "--out", "v.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("v.json"));
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        assert!(e["rel_err"].as_f64().unwrap() <= 1e-6);
    }
    assert!(entries[0]["omega_k"].is_null());
    assert!(entries[2]["inequality_min_slack"].as_f64().unwrap() >= 0.0);
}

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = glefield(dir.path(), &["kernel", "--config", "does/not/exist.toml", "--out", "k.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does/not/exist.toml"));
}

#[test]
fn unknown_config_keys_are_rejected_with_their_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[kernel]\nkernel = expsum\nrates = [1.0]\n").unwrap();
    let out = glefield(dir.path(), &["kernel", "--config", "c.toml", "--out", "k.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3") && msg.contains("rates"), "{msg}");
}

#[test]
fn two_lag_variogram_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    assert!(glefield(dir.path(), &["sample-field", "--config", "c.toml", "--out", "f.csv"]).status.success());
    let out = glefield(
        dir.path(),
        &["hoelder", "--in", "f.csv", "--axis", "time", "--lags", "0.03125,0.0625", "--out", "h.json"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn field_round_trip_through_hoelder() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = glefield(dir.path(), &["sample-field", "--config", "c.toml", "--n", "2048", "--out", "f.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(text.starts_with("path_id,t,x,value\n"));
    assert_eq!(text.lines().count(), 1 + 6 * 2048 * 15);

    let meta = read_json(&dir.path().join("f.csv.meta.json"));
    assert_eq!(meta["details"]["N"], 16);
    assert_eq!(meta["details"]["wellposedness"]["verdict"], "convergent");
    assert!(meta["details"]["tail_bound"].as_f64().unwrap() <= 0.1);

    let out = glefield(
        dir.path(),
        &["hoelder", "--in", "f.csv", "--axis", "time", "--lags", "truncation", "--config", "c.toml", "--bootstrap", "50", "--out", "h.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("h.json"));
    for key in ["axis", "gamma_hat", "ci", "r_squared", "lags", "values", "stderr", "oracle_values"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let gamma = report["gamma_hat"].as_f64().unwrap();
    assert!(gamma > 0.3 && gamma < 0.7, "{gamma}");
}

#[test]
fn sidecar_hash_matches_reserialized_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[basis]\nL = 2.5\n[weights]\nrule = power\ns = 0.25\n").unwrap();
    let out = glefield(
        dir.path(),
        &["sample-mode", "--config", "c.toml", "--k", "4", "--n", "64", "--ensemble", "2", "--method", "ss", "--out", "p.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = read_json(&dir.path().join("p.csv.meta.json"));
    let json = serde_json::to_string(&meta["config"]).unwrap();
    let digest: String = Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(meta["config_hash"].as_str().unwrap(), digest);
    assert_eq!(meta["config"]["sampler"]["method"], "ss");
    assert_eq!(meta["config"]["basis"]["L"], 2.5);
    assert_eq!(meta["details"]["method"], "spectral_synthesis");
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // A one-time-unit grid is far too short for the slowly decaying first mode.
    let out = glefield(
        dir.path(),
        &["sample-mode", "--k", "1", "--dt", "0.00390625", "--n", "256", "--ensemble", "2", "--out", "p.csv"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spectrum_and_kernel_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(glefield(dir.path(), &["kernel", "--t-max", "1", "--points", "3", "--out", "k.csv"]).status.success());
    let k = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    let lines: Vec<&str> = k.lines().collect();
    assert_eq!(lines[0], "t,value");
    assert_eq!(lines[1], "0,1");
    let out = glefield(dir.path(), &["spectrum", "--k", "3", "--omega-max", "30", "--points", "7", "--out", "s.csv"]);
    assert!(out.status.success());
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(s.starts_with("omega,rho,k_cos,k_sin\n"));
    assert_eq!(s.lines().count(), 8);
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_glefield"))
        .args(["kernel", "--out", "k.csv"])
        .current_dir(dir.path())
        .env("GLEFIELD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
