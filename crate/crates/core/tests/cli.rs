//! The `sparse-doa` binary end to end.

use std::path::PathBuf;
use std::process::{Command, Output};

use sparse_doa::lasso_path::orthogonal_knots;
use sparse_doa::signal_model::{ModelConfig, Snapshot};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-doa"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
    let o = run(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["threshold", "--test", "A", "--m", "8"]).status.code(), Some(1));
    assert_eq!(run(&["threshold", "--test", "A", "--m", "4", "--s", "4"]).status.code(), Some(1));
    let o = run(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn threshold_prints_one_csv_row() {
    let o = run(&["threshold", "--test", "A", "--m", "8", "--s", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("test,M,S,pc,eta"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["A", "8", "1"]);
    let eta: f64 = row[4].parse().unwrap();
    // Largest of 7 unit Rayleigh variables at 0.99.
    let expected = (-2.0 * (1.0 - 0.99f64.powf(1.0 / 7.0)).ln()).sqrt();
    assert!((eta - expected).abs() < 1e-8);
}

#[test]
fn threshold_for_d_needs_a_model() {
    assert_eq!(run(&["threshold", "--test", "D", "--m", "8", "--s", "0"]).status.code(), Some(1));
    let model = config("oversampled.json");
    let o = run(&["threshold", "--test", "D", "--m", "8", "--s", "2", "--model", model.to_str().unwrap(), "--active", "6,9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn noiseless_snapshot_detects_one_source() {
    let model = config("orthogonal.json");
    let snap = config("snapshot_single.json");
    for test in ["A", "B", "cov-exact", "E"] {
        let o = run(&[
            "detect", "--model", model.to_str().unwrap(), "--snapshot", snap.to_str().unwrap(),
            "--test", test, "--sigma", "1e-4",
        ]);
        assert!(o.status.success(), "{test}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["s_hat"], 1, "{test}");
        assert_eq!(v["support"][0], 4, "{test}");
    }
}

#[test]
fn path_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.csv");
    let model_path = config("orthogonal.json");
    let snap_path = config("snapshot_single.json");
    let o = run(&[
        "path", "--model", model_path.to_str().unwrap(), "--snapshot", snap_path.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    let model: ModelConfig = serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let model = model.build().unwrap();
    let snap: Snapshot = serde_json::from_str(&std::fs::read_to_string(&snap_path).unwrap()).unwrap();
    let expected = orthogonal_knots(&model, &snap.measurement()).unwrap();

    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["knot_index", "tau", "entering_index", "active_set_size", "event"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), expected.knots.len());
    for (row, knot) in rows.iter().zip(&expected.knots) {
        let tau: f64 = row[1].parse().unwrap();
        assert!((tau - knot.tau).abs() <= 1e-8 * knot.tau.max(1e-300) + 1e-300);
        assert_eq!(row[2].parse::<usize>().unwrap(), knot.entering_index);
    }
}

#[test]
fn simulate_table4b_within_confidence_band() {
    let dir = tempfile::tempdir().unwrap();
    let csv_out = dir.path().join("t4b.csv");
    let json_out = dir.path().join("t4b.json");
    let o = run(&[
        "simulate", "--config", config("table4b.json").to_str().unwrap(),
        "--out", csv_out.to_str().unwrap(), "--json", json_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&csv_out).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let row = rdr.records().next().unwrap().unwrap();
    let pc: f64 = row[col("pc_hat")].parse().unwrap();
    let half: f64 = row[col("ci_halfwidth")].parse().unwrap();
    assert_eq!(&row[col("trials")], "10000");
    assert!((pc - 0.9904).abs() <= 0.01, "pc_hat {pc}");
    assert!(half > 0.0 && half < 0.01);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_rejects_too_few_trials() {
    let o = run(&["simulate", "--table", "4", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(1));
}
