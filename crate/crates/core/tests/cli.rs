use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn krabc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_krabc"));
    cmd.args(args).env_remove("KRABC_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn small_config(dir: &Path, out: &str) -> String {
    let text = format!(
        r#"{{
  "experiment": "conjugate-oracle",
  "trials": 2,
  "master_seed": 5,
  "output_dir": "{out}",
  "run": {{
    "simulator": {{"kind": "gaussian-mean", "dim": 1, "n_obs": 20, "cov_diag": 1.0}},
    "prior": {{"kind": "normal-product", "mean": [0.0], "sd": [10.0]}},
    "summarizer": {{"kind": "quantiles", "levels": 5}},
    "n_particles": 20,
    "n_iterations": 2,
    "delta": 0.001
  }}
}}"#
    );
    write(dir, "small.json", &text)
}

#[test]
fn run_writes_reports_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = small_config(tmp.path(), &out.to_string_lossy());
    let o = krabc(&["run", "--config", &cfg, "--jobs", "1"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,seed,status,param_error,data_error,wall_s,mle_error,mu_1"
    );
    assert_eq!(lines.count(), 2);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().contains("sum_of_weights"));
    assert_eq!(trace.lines().count(), 1 + 2 * 2);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn seed_env_overrides_master_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = small_config(tmp.path(), &out.to_string_lossy());
    let o = krabc(&["run", "--config", &cfg], &[("KRABC_SEED", "100")]);
    assert_eq!(o.status.code(), Some(0));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let seeds: Vec<&str> = results.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["100", "101"]);

    let o = krabc(&["run", "--config", &cfg], &[("KRABC_SEED", "abc")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_type = write(tmp.path(), "a.json", r#"{"experiment": "blowfly", "trials": "three"}"#);
    let o = krabc(&["run", "--config", &bad_type], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));

    let unknown = write(tmp.path(), "b.json", r#"{"experiment": "blowfly", "trails": 3}"#);
    assert_eq!(krabc(&["run", "--config", &unknown], &[]).status.code(), Some(2));

    let missing = tmp.path().join("nope.json");
    assert_eq!(krabc(&["run", "--config", &missing.to_string_lossy()], &[]).status.code(), Some(2));
    assert_eq!(krabc(&["bench", "no-such-benchmark"], &[]).status.code(), Some(2));
    assert_eq!(krabc(&["validate", "--config", &unknown], &[]).status.code(), Some(2));
}

#[test]
fn every_trial_failing_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = format!(
        r#"{{"experiment": "conjugate-oracle", "trials": 2, "output_dir": "{}",
            "observed_csv": "{}"}}"#,
        out.to_string_lossy(),
        tmp.path().join("absent.csv").to_string_lossy()
    );
    let cfg = write(tmp.path(), "c.json", &text);
    let o = krabc(&["run", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.split(',').nth(2).is_some_and(|c| c.starts_with("failed: ") && c.contains("absent.csv"))), "{results}");
}

#[test]
fn validate_reports_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = small_config(tmp.path(), &out.to_string_lossy());
    let o = krabc(&["validate", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("total simulations: 80"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn show_round_trips_through_run_config() {
    let o = krabc(&["show", "mixture"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let shown = String::from_utf8(o.stdout).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "m.json", &shown);
    let o = krabc(&["validate", "--config", &p], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn help_documents_columns_and_exit_codes() {
    let o = krabc(&["--help"], &[]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["results.csv", "trace.csv", "sum_of_weights", "Exit codes", "KRABC_SEED"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}
