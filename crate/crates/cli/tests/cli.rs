//! End-to-end tests of the `oqrw` binary: exit codes, JSON shape, CSV
//! emission, and the determinism contract.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oqrw"))
}

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn oqrw")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn validate_accepts_normalized_family() {
    let out = run(&["validate", model("bc_walk.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["valid"], Value::Bool(true));
    assert!(v["normalization_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["diagnostics"]["fixed_space_dim"], 1);
}

#[test]
fn validate_rejects_unnormalized_family_with_residual() {
    let out = run(&["validate", model("oqrw_2d_typo.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_stdout(&out);
    assert_eq!(v["valid"], Value::Bool(false));
    let residual = v["normalization_residual"].as_f64().unwrap();
    assert!((residual - 3.0 / 16.0).abs() < 1e-12, "residual {residual}");
}

#[test]
fn malformed_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = run(&["analyze", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reports_walk_parameters() {
    let out = run(&["analyze", model("bc_walk.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["mode"], "walk");
    assert!(v["drift"][0].as_f64().unwrap().abs() < 1e-10);
    let var = v["covariance"][0][0].as_f64().unwrap();
    assert!((var - 8.0 / 9.0).abs() < 1e-10, "variance {var}");
}

#[test]
fn analyze_reports_record_parameters() {
    let out = run(&["analyze", model("bc_record.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["mode"], "record");
    for i in 0..2 {
        assert!((v["drift"][i].as_f64().unwrap() - 0.5).abs() < 1e-10);
    }
    assert!((v["covariance"][0][1].as_f64().unwrap() + 2.0 / 9.0).abs() < 1e-10);
}

#[test]
fn analyze_reducible_model_hints_at_blocks() {
    let out = run(&["analyze", model("blocks_direct_sum.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("oqrw blocks"), "stderr: {err}");
}

#[test]
fn exact_emits_moments_and_site_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "exact",
        model("bc_walk.json").to_str().unwrap(),
        "--steps",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert!((v["mean"][0].as_f64().unwrap() - 96.0 / 81.0).abs() < 1e-12);
    assert_eq!(v["support_sites"], 5);

    let csv = std::fs::read_to_string(dir.path().join("bc_walk_sites.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,probability"));
    let rows: Vec<(i64, f64)> = lines
        .map(|l| {
            let (s, p) = l.split_once(',').unwrap();
            (s.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    let expected = [
        (-4, 1.0 / 81.0),
        (-2, 10.0 / 81.0),
        (0, 27.0 / 81.0),
        (2, 26.0 / 81.0),
        (4, 17.0 / 81.0),
    ];
    assert_eq!(rows.len(), expected.len());
    for ((s, p), (es, ep)) in rows.iter().zip(expected.iter()) {
        assert_eq!(s, es);
        assert!((p - ep).abs() < 1e-12);
    }
    assert!(dir.path().join("bc_walk_sites.gp").exists());
}

#[test]
fn exact_rejects_record_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "exact",
        model("bc_record.json").to_str().unwrap(),
        "--steps",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_stdout_is_identical_across_worker_counts() {
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[
            "simulate",
            model("bc_walk.json").to_str().unwrap(),
            "--steps",
            "50",
            "--traj",
            "40",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1], "stdout differs between worker counts");
}

#[test]
fn simulate_compares_against_analytic_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        model("bc_walk.json").to_str().unwrap(),
        "--steps",
        "100",
        "--traj",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["empirical"]["scaling"], "standardized");
    assert!(v["comparison"]["analytic_covariance"][0][0].as_f64().is_some());
    assert!(dir.path().join("bc_walk_trajectories.csv").exists());
    assert!(dir.path().join("bc_walk_histogram.csv").exists());
}

#[test]
fn simulate_handles_record_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        model("spontaneous_emission.json").to_str().unwrap(),
        "--steps",
        "100",
        "--traj",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    // The record is eventually all first-outcome: standardized mean stays
    // bounded and the second coordinate freezes.
    assert_eq!(v["empirical"]["samples"], 50);
}

#[test]
fn blocks_reports_mixture_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "blocks",
        model("blocks_direct_sum.json").to_str().unwrap(),
        "--steps",
        "100",
        "--traj",
        "400",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    for b in 0..2 {
        assert!((v["blocks"][b]["weight"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    }
    assert!(v["blocks"][0]["drift"][0].as_f64().unwrap().abs() < 1e-10);
    assert!((v["blocks"][1]["drift"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["drifts_distinct"], Value::Bool(true));
    assert_eq!(v["classification"]["ambiguous"], Value::Bool(false));
    assert!(dir.path().join("blocks_direct_sum_classification.csv").exists());
}

#[test]
fn blocks_requires_a_blocks_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "blocks",
        model("bc_walk.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_bundled_model_validates() {
    for name in [
        "bc_walk.json",
        "trivial_walk.json",
        "oqrw_2d.json",
        "bc_record.json",
        "spontaneous_emission.json",
        "blocks_direct_sum.json",
    ] {
        let out = run(&["validate", model(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name} failed validation");
    }
}
