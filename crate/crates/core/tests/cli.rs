use std::path::Path;
use std::process::{Command, Output};

fn sigma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{"d": 1, "M": 8, "N": 2, "m": 1.0, "lambda": 1.0, "dt": 0.01, "T_burn": 0.1, "T_sample": 0.2, "seed": 3, "energy_audit_every": 4}"#;

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(sigma(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(sigma(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"d": 1, "M": 6, "N": 2, "m": 1.0, "lambda": 1.0, "dt": 0.01, "T_sample": 1.0}"#);
    let out = sigma(&["grid-info", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains('M'));

    let cfg = write_config(tmp.path(), r#"{"d": 1, "M": 8, "N": 2, "m": 1.0, "lambda": 1.0, "dt": 0.01, "T_sample": 1.0, "colour": 2}"#);
    let out = sigma(&["grid-info", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_config_is_reported() {
    let out = sigma(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn grid_info_reports_partition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = sigma(&["grid-info", "--config", &cfg]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sites"], 8);
    assert_eq!(v["j_max"], 2);
}

#[test]
fn simulate_is_deterministic_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for dir in ["a", "b"] {
        let d = tmp.path().join(dir);
        let out = sigma(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["simulate.csv", "energy.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let man: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(man["seed"], 3);
    assert_eq!(man["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(tmp.path().join("a/simulate.csv")).unwrap();
    assert!(csv.starts_with("config_hash,t,step,"));
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for (dir, seed) in [("a", "1"), ("b", "2")] {
        let d = tmp.path().join(dir);
        assert!(sigma(&["simulate", "--config", &cfg, "--seed", seed, "--out", d.to_str().unwrap()]).status.success());
    }
    let a = std::fs::read(tmp.path().join("a/simulate.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/simulate.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn resume_rejects_a_different_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let d = tmp.path().join("run");
    let ds = d.to_str().unwrap();
    assert!(sigma(&["simulate", "--config", &cfg, "--out", ds, "--max-steps", "5"]).status.success());
    let ck = d.join("checkpoint.json");
    let out = sigma(&["simulate", "--config", &cfg, "--seed", "99", "--out", ds, "--resume", ck.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));
}

#[test]
fn convergence_needs_a_wide_range_of_n() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = sigma(&["convergence", "--config", &cfg, "--n-list", "2,4,8", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn besov_selftest_writes_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let out = sigma(&["besov-selftest", "--out", d, "--samples", "5", "--sizes", "8,16"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("constants.csv")).unwrap();
    assert!(csv.starts_with("lemma_id,alpha,beta,gamma,p,q,M,samples,measured_K"));
    assert_eq!(csv.lines().count(), 1 + 2 * 10);
}
