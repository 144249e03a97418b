use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sacovest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sacovest")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_in(dir: &Path, command: &str, config: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sacovest(&args)
}

fn summary(dir: &Path, out: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(out).join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_trace_sigma_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", r#"{"command": "run", "problem": "boxqp", "n": 3000, "seed": 4}"#);
    let out = run_in(dir.path(), "run", &cfg, "o", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "sigma_hat.csv", "summary.json"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert!(trace.starts_with("k,dist_to_star_sq,shadow_sq_dist\n"));
    assert_eq!(trace.lines().count(), 1 + 1000);
    let s = summary(dir.path(), "o");
    assert_eq!(s["n"], 3000);
    assert_eq!(s["sigma_truth_mode"], "analytic");
    assert!(s["ci"]["lo"].as_f64().unwrap() <= s["ci"]["hi"].as_f64().unwrap());
}

#[test]
fn rate_and_coverage_files_have_their_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"command": "rate", "problem": "l1quad", "n_grid": [500, 1000], "reps": 3}"#,
    );
    assert!(run_in(dir.path(), "rate", &cfg, "r", &[]).status.success());
    let rate = fs::read_to_string(dir.path().join("r/rate.csv")).unwrap();
    assert!(rate.starts_with("n,rep,opnorm_error\n"));
    assert_eq!(rate.lines().count(), 1 + 6);

    assert!(run_in(dir.path(), "coverage", &cfg, "c", &[]).status.success());
    let cov = fs::read_to_string(dir.path().join("c/coverage.csv")).unwrap();
    assert!(cov.starts_with("n,rep,error,ci_lo,ci_hi,covered\n"));
    assert_eq!(summary(dir.path(), "c")["command"], "coverage");
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", r#"{"command": "run", "problem": "l1quad", "n": 100}"#);
    assert!(run_in(dir.path(), "run", &cfg, "o", &["--n", "250", "--seed", "9"]).status.success());
    let s = summary(dir.path(), "o");
    assert_eq!(s["n"], 250);
    assert_eq!(s["config"]["seed"], 9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", r#"{"command": "diagnose", "problem": "game", "n": 2000, "reps": 4}"#);
    for out in ["a", "b"] {
        assert!(run_in(dir.path(), "diagnose", &cfg, out, &["--threads", "1"]).status.success());
    }
    assert!(run_in(dir.path(), "diagnose", &cfg, "c", &["--threads", "3"]).status.success());
    for f in ["summary.json", "trace.csv", "sigma_hat.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(dir.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parabola_is_flagged_for_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", r#"{"command": "diagnose", "problem": "parabola", "n": 2000, "reps": 8}"#);
    assert!(run_in(dir.path(), "diagnose", &cfg, "o", &[]).status.success());
    let s = summary(dir.path(), "o");
    assert_eq!(s["sigma_truth_mode"], "monte_carlo_only");
    assert!(s["sigma_mc"].is_array());
    assert!(dir.path().join("o/sigma_mc.csv").exists());
}

#[test]
fn list_problems_needs_no_config() {
    let out = sacovest(&["list-problems"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["problems"].as_array().unwrap().len(), 4);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"command": "run", "problem": "l1quad", "n": 100, "beta": 1.5}"#,
        r#"{"command": "run", "problem": "nope", "n": 100}"#,
        r#"{"command": "run", "problem": "l1quad"}"#,
        r#"{"command": "rate", "problem": "l1quad", "n_grid": [1000, 500]}"#,
        r#"{"command": "run", "problem": "l1quad", "n": 100, "typo": 1}"#,
        r#"{"command": "run", "problem": "boxqp", "n": 100, "overrides": {"lambda": 1.0}}"#,
        r#"{"command": "run", "#,
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), body);
        let out = run_in(dir.path(), "run", &cfg, "o", &[]);
        assert_eq!(out.status.code(), Some(1), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(sacovest(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sacovest(&["run"]).status.code(), Some(1));
    assert_eq!(sacovest(&["run", "--config", "/definitely/missing.json"]).status.code(), Some(1));
    assert_eq!(sacovest(&["run", "--bogus-flag"]).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let diverge = write_config(dir.path(), "div.json", r#"{"command": "run", "problem": "l1quad", "n": 1000, "eta": 50.0}"#);
    let out = run_in(dir.path(), "run", &diverge, "o", &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let ok = write_config(dir.path(), "ok.json", r#"{"command": "run", "problem": "l1quad", "n": 10}"#);
    let out = sacovest(&["run", "--config", ok.to_str().unwrap(), "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
