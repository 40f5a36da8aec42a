use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spinbus");

fn spinbus(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("SPINBUS_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn spectrum_success() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\n[spectrum]\nchain = \"two-site-trivial\"\n");
    let out = dir.path().join("out");
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(text.starts_with("level,energy [GHz],block,residual [GHz]\n0,-1.00000000000e0,"));
    let meta = read_json(&out.join("metadata.json"));
    assert_eq!(meta["subcommand"], "spectrum");
    assert_eq!(meta["threads"], 1);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nunknown_key = true\n");
    let out = dir.path().join("out");
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));
    let marker = read_json(&out.join("FAILED.json"));
    assert_eq!(marker["exit_code"], 2);
    assert_eq!(marker["subcommand"], "spectrum");
    assert!(!out.join("metadata.json").exists());
}

#[test]
fn missing_config_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = spinbus(&["spectrum", "--config", "/nonexistent/run.toml", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(read_json(&out.join("FAILED.json"))["exit_code"], 4);
}

#[test]
fn numerical_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // 15 sites exceeds the dense cap
    let cfg = write_config(dir.path(), "schema_version = 1\n[spectrum.chain]\nn_couplers = 13\ndelta_c = 5.0\nj_cc = 0.5\ndelta_q = 2.0\nj_qc = 0.3\n");
    let out = dir.path().join("out");
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("FAILED.json").exists());
}

#[test]
fn failure_replaces_stale_results_and_success_clears_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_config(dir.path(), "schema_version = 1\n[spectrum]\nchain = \"two-site-trivial\"\n");
    assert!(spinbus(&["spectrum", "--config", &good, "--out", out.to_str().unwrap()], &[]).status.success());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 9\n").unwrap();
    assert_eq!(spinbus(&["spectrum", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]).status.code(), Some(2));
    assert!(!out.join("metadata.json").exists());
    assert!(spinbus(&["spectrum", "--config", &good, "--out", out.to_str().unwrap()], &[]).status.success());
    assert!(!out.join("FAILED.json").exists());
}

#[test]
fn thread_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\n[spectrum]\nchain = \"two-site-trivial\"\n");
    let out = dir.path().join("out");
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], &[("SPINBUS_THREADS", "2")]);
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("metadata.json"))["threads"], 2);
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"], &[("SPINBUS_THREADS", "2")]);
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("metadata.json"))["threads"], 1);
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], &[("SPINBUS_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
    let o = spinbus(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "0"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\n[noise]\nn_couplers = 3\nn_runs = 8\nn_levels = 4\n");
    let run = |name: &str, threads: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = spinbus(&["noise", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--threads", threads], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out.join("linewidths.csv")).unwrap(), std::fs::read(out.join("noise_levels.csv")).unwrap(), read_json(&out.join("metadata.json")))
    };
    let a = run("a", "1", "4");
    let b = run("b", "3", "4");
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2["seed"], 4);
    assert_eq!(a.2["stochastic"], true);
    assert_eq!(a.2["config_hash"], b.2["config_hash"]);
    let c = run("c", "1", "5");
    assert_ne!(a.0, c.0);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = spinbus(&["spectra", "--config", "x", "--out", "y"], &[]);
    assert_eq!(o.status.code(), Some(2));
}
