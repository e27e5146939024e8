use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mml-estim"))
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn data_arg() -> String {
    format!("data={}", manifest("data/weibull_n100_seed7.txt").display())
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a `quantity,coordinate,value` table, comments skipped.
fn table(text: &str) -> Vec<(String, String, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

fn value(rows: &[(String, String, f64)], q: &str, c: &str) -> f64 {
    rows.iter()
        .find(|(a, b, _)| a == q && b == c)
        .unwrap_or_else(|| panic!("no row {q},{c}"))
        .2
}

#[test]
fn fit_matches_golden_table() {
    let out = run(&["fit", &data_arg()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let golden = std::fs::read_to_string(manifest("tests/golden/fit_weibull_n100_seed7.csv")).unwrap();
    let got = table(&stdout(&out));
    let want = table(&golden);
    assert_eq!(got.len(), want.len());
    for ((q1, c1, v1), (q2, c2, v2)) in got.iter().zip(&want) {
        assert_eq!((q1, c1), (q2, c2));
        // residuals sit at rounding level, so they get an absolute floor
        assert!(
            (v1 - v2).abs() <= 1e-7 * v2.abs() + 1e-12,
            "{q1},{c1}: {v1} vs golden {v2}"
        );
    }
}

#[test]
fn fit_shift_follows_prediction() {
    let out = run(&["fit", &data_arg()]);
    let rows = table(&stdout(&out));
    for c in ["k", "lambda"] {
        let p = value(&rows, "predicted_shift", c);
        let o = value(&rows, "observed_shift", c);
        assert!((o - p).abs() < 0.1 * p.abs(), "{c}: observed {o}, predicted {p}");
    }
}

#[test]
fn fit_with_jeffreys_reports_zero_shift() {
    let out = run(&["fit", &data_arg(), "prior=jeffreys"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = table(&stdout(&out));
    assert!(value(&rows, "shift_max_abs", "all").abs() < 1e-10);
    assert_eq!(value(&rows, "predicted_shift", "k"), 0.0);
}

#[test]
fn fit_json_output() {
    let out = run(&["fit", &data_arg(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["model"], "weibull");
    assert_eq!(v["n"], 100);
    assert!(v["wf"]["converged"].as_bool().unwrap());
}

#[test]
fn missing_data_file_exits_2_naming_path() {
    let out = run(&["fit", "data=/nonexistent/sample.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/sample.txt"), "{}", stderr(&out));
}

#[test]
fn malformed_data_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    std::fs::write(&p, "1.0\n2.0\nabc\n").unwrap();
    let out = run(&["fit", &format!("data={}", p.display())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn degenerate_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.txt");
    std::fs::write(&p, "1.5\n".repeat(20)).unwrap();
    let out = run(&["fit", &format!("data={}", p.display())]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.cfg");
    std::fs::write(&p, "model = weibull\ncolour = blue\n").unwrap();
    let out = run(&["fit", "--config", p.to_str().unwrap(), &data_arg()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("colour"), "{err}");
}

#[test]
fn config_file_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "# small study\ntheta = 2,1\nn = 60\nreplicates = 150\nseed = 11\n").unwrap();
    let out_path = dir.path().join("report.csv");
    let out = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()])
        .env("MML_ESTIM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.starts_with("estimator,coordinate,mean,bias,se,theory,z"));

    // same study on one worker and with a command-line seed override
    let single = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("MML_ESTIM_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(stdout(&single), written);
    let reseeded = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(stdout(&reseeded), written);
}

#[test]
fn bias_table_rows() {
    let out = run(&["bias-table", "k_grid=2", "lambda_grid=1", "n_grid=100"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((row[3] - 0.027590).abs() < 1e-6);
    assert!((row[5] - 0.008136).abs() < 1e-6);
    assert!(row[12] < 1e-5);
}

#[test]
fn codelength_json_keys() {
    let out = run(&["codelength", &data_arg()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["total", "assertion", "detail", "bic_form", "gap", "units"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let total = v["total"].as_f64().unwrap();
    let parts = v["assertion"].as_f64().unwrap() + v["detail"].as_f64().unwrap();
    assert!((total - parts).abs() <= 1e-12 * total.abs());

    let bits = run(&["codelength", &data_arg(), "--bits"]);
    let b: serde_json::Value = serde_json::from_str(&stdout(&bits)).unwrap();
    assert_eq!(b["units"], "bits");
    assert!((b["total"].as_f64().unwrap() * std::f64::consts::LN_2 - total).abs() < 1e-9);
}

#[test]
fn improper_prior_codelength_warns() {
    let out = run(&["codelength", &data_arg(), "prior=flat"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("additive constant"));
}

#[test]
fn verify_subset_passes() {
    let out = run(&["verify", "--fast", "criteria=3,4,9"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}

#[test]
fn verify_rejects_unknown_criterion() {
    let out = run(&["verify", "criteria=12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--format", "xml", &data_arg()]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
