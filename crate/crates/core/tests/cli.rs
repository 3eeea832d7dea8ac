use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scir")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = scir(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            r#"{{"a": 1.0, "b": 1.0, "sigma": 1.0, "alpha": 1.5, "dt": 0.05, "ns": [50, 200],
               "replications": 3, "base_seed": 17, "families": ["clse", "wclse", "sigma"]{extra}}}"#
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    let obs = obs.to_str().unwrap();
    ok(&["simulate", "--mode", "low", "--n", "2000", "--seed", "4", "--out", obs]);
    let text = fs::read_to_string(obs).unwrap();
    assert!(text.starts_with("# mode=low\nk,x\n0,"));
    assert_eq!(text.lines().count(), 2003);

    let est = String::from_utf8(ok(&["estimate", "--input", obs, "--seed", "4"]).stdout).unwrap();
    let lines: Vec<&str> = est.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("CLSE,2000,4,") && lines[2].starts_with("WCLSE,2000,4,"));
    let b: f64 = lines[2].split(',').nth(5).unwrap().parse().unwrap();
    assert!((b - 1.0).abs() < 0.5, "{b}");
}

#[test]
fn high_frequency_estimate_reports_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("hf.csv");
    let obs = obs.to_str().unwrap();
    ok(&["simulate", "--mode", "high", "--n", "5000", "--seed", "2", "--out", obs]);
    let est = String::from_utf8(ok(&["estimate", "--input", obs]).stdout).unwrap();
    let row: Vec<&str> = est.lines().nth(1).unwrap().split(',').collect();
    let s: f64 = row[4].parse().unwrap();
    assert!(s > 0.7 && s < 1.3, "{s}");
}

#[test]
fn simulate_is_bit_identical_across_runs() {
    let a = ok(&["simulate", "--horizon", "20", "--seed", "9"]).stdout;
    let b = ok(&["simulate", "--horizon", "20", "--seed", "9"]).stdout;
    let c = ok(&["simulate", "--horizon", "20", "--seed", "10"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn campaign_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", "");
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    ok(&["mc", "--config", &cfg, "--threads", "1", "--out", one.to_str().unwrap()]);
    ok(&["mc", "--config", &cfg, "--threads", "4", "--out", four.to_str().unwrap()]);
    for name in ["estimates.csv", "partial_sums.csv", "sigma.csv", "summary.json"] {
        let a = fs::read(one.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(four.join(name)).unwrap(), "{name}");
    }
    let est = fs::read_to_string(one.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn config_rejects_unknown_keys_and_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "extra.json", r#", "gamma": 0.5"#);
    assert!(!scir(&["mc", "--config", &cfg]).status.success());
    let cfg = dir.path().join("bad_b.json");
    fs::write(
        &cfg,
        r#"{"a": 1, "b": -1, "sigma": 1, "alpha": 1.5, "dt": 0.01, "ns": [10], "replications": 1,
            "base_seed": 0, "families": ["clse"]}"#,
    )
    .unwrap();
    assert!(!scir(&["validate", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn validate_rejects_invalid_parameters() {
    assert!(!scir(&["validate", "--alpha", "2.5"]).status.success());
    assert!(!scir(&["validate", "--b", "0"]).status.success());
}

#[test]
fn diagnose_emits_json() {
    let out = ok(&["diagnose", "--n", "5000", "--horizon", "500", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["tail"].is_object());
    assert!(v["mixing"]["tv_bound"].as_array().unwrap().len() > 1);
}

#[test]
fn validate_passes_for_default_parameters() {
    let out = ok(&["validate", "--seed", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 9);
}
