//! End-to-end tests of the binary: exit codes, artifact determinism, and the
//! assert gates.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rateq"))
}

fn ramp_config() -> String {
    r#"{
  "model": {
    "kind": "kinematic",
    "p_dim": 1,
    "elastic_c": [[0.5]],
    "hardening_hp": [[0.5]],
    "sigma_y": 1.0
  },
  "load": {
    "t_end": 2.0,
    "knots": [
      { "t": 0.0, "value": [0.0] },
      { "t": 2.0, "value": [2.0] }
    ]
  },
  "partition": { "n": 25 },
  "theta": 1.0
}"#
    .to_string()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn solve_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let output = run(&[
            "solve",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&output),
            0,
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let csv1 = std::fs::read(out1.join("trajectory.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("trajectory.csv")).unwrap();
    assert_eq!(
        csv1, csv2,
        "trajectory CSV must be byte-identical across runs"
    );
    let json1 = std::fs::read(out1.join("summary.json")).unwrap();
    let json2 = std::fs::read(out2.join("summary.json")).unwrap();
    assert_eq!(
        json1, json2,
        "summary JSON must be byte-identical across runs"
    );

    // no NaN ever serialized; one header plus N + 1 node rows
    let text = String::from_utf8(csv1).unwrap();
    assert!(!text.to_lowercase().contains("nan"));
    assert_eq!(text.lines().count(), 1 + 25 + 1);
}

#[test]
fn theta_and_steps_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--theta",
        "0.5",
        "--steps",
        "10",
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["theta"].as_f64().unwrap(), 0.5);
    assert_eq!(summary["n_steps"].as_u64().unwrap(), 10);
}

#[test]
fn bad_theta_is_a_config_error_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &ramp_config().replace("\"theta\": 1.0", "\"theta\": 0.3"),
    );
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("theta must lie in [1/2,1]"),
        "rejection must cite the theta range: {stderr}"
    );
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &ramp_config().replace("\"theta\": 1.0", "\"theta\": 1.0, \"surprise\": 1"),
    );
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("surprise"));
}

#[test]
fn zero_load_solve_emits_all_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &ramp_config().replace(
            "{ \"t\": 2.0, \"value\": [2.0] }",
            "{ \"t\": 2.0, \"value\": [0.0] }",
        ),
    );
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    for line in text.lines().skip(1) {
        let y: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(y, 0.0);
    }
}

#[test]
fn certify_round_trip_and_assert_gate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let candidate = out.join("trajectory.csv");

    // own output certifies to (near) zero
    let output = run(&[
        "certify",
        "--config",
        config.to_str().unwrap(),
        "--candidate",
        candidate.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--assert",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap())
            .unwrap();
    assert!(cert["applicable"].as_bool().unwrap());

    // a corrupted candidate fails the assert gate with exit 4
    let mut corrupted = String::new();
    for (i, line) in std::fs::read_to_string(&candidate)
        .unwrap()
        .lines()
        .enumerate()
    {
        if i == 10 {
            let mut fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            fields[2] = "4.0e-1".into();
            corrupted.push_str(&fields.join(","));
        } else {
            corrupted.push_str(line);
        }
        corrupted.push('\n');
    }
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, corrupted).unwrap();
    let output = run(&[
        "certify",
        "--config",
        config.to_str().unwrap(),
        "--candidate",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--assert",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(
        code(&output),
        4,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn infeasible_candidate_serializes_infinite_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    // blow one node far outside the feasible tube
    let mut corrupted = String::new();
    for (i, line) in std::fs::read_to_string(out.join("trajectory.csv"))
        .unwrap()
        .lines()
        .enumerate()
    {
        if i == 12 {
            let mut fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            fields[2] = "5.0e1".into();
            corrupted.push_str(&fields.join(","));
        } else {
            corrupted.push_str(line);
        }
        corrupted.push('\n');
    }
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, corrupted).unwrap();
    let output = run(&[
        "certify",
        "--config",
        config.to_str().unwrap(),
        "--candidate",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(cert["uniform_norm_bound"], serde_json::json!("inf"));
    assert_eq!(cert["functional_value"], serde_json::json!("inf"));
}

#[test]
fn inexact_solve_certifies_at_the_predicted_bound() {
    let dir = tempfile::tempdir().unwrap();
    // inner_tol in the config switches solve to the generalized scheme
    let config = write_config(
        dir.path(),
        &ramp_config().replace(
            "\"theta\": 1.0",
            "\"theta\": 1.0, \"tolerances\": { \"inner_tol\": 1e-4 }",
        ),
    );
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let output = run(&[
        "certify",
        "--config",
        config.to_str().unwrap(),
        "--candidate",
        out.join("trajectory.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap())
            .unwrap();
    // alpha = 1 for this config: bound must sit at or below sqrt(2e-4)
    let bound = cert["uniform_norm_bound"].as_f64().unwrap();
    assert!(bound <= (2.0 * 1e-4f64).sqrt() * 1.0001, "bound {bound}");
}

#[test]
fn starved_inner_iterations_exit_with_solver_code() {
    let dir = tempfile::tempdir().unwrap();
    // anisotropic elasticity: the incremental solves are genuinely iterative,
    // so one inner iteration cannot reach a 1e-12 gap on plastic steps
    let config = write_config(
        dir.path(),
        r#"{
  "model": {
    "kind": "kinematic",
    "p_dim": 2,
    "elastic_c": [[2.0, 0.3], [0.3, 1.0]],
    "hardening_hp": [[1.0, 0.0], [0.0, 1.0]],
    "sigma_y": 1.0
  },
  "load": {
    "t_end": 2.0,
    "knots": [
      { "t": 0.0, "value": [0.0, 0.0] },
      { "t": 2.0, "value": [3.0, 1.0] }
    ]
  },
  "partition": { "n": 16 },
  "theta": 1.0,
  "tolerances": { "inner_tol": 1e-12, "max_inner_iterations": 1 }
}"#,
    );
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&output),
        3,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stderr).contains("did not converge"));
}

#[test]
fn adapt_certifies_the_ramp() {
    let dir = tempfile::tempdir().unwrap();
    // 13 steps put the yield time inside an interval, so refinement happens
    let config = write_config(dir.path(), &ramp_config().replace("\"n\": 25", "\"n\": 13"));
    let out = dir.path().join("out");
    let output = run(&[
        "adapt",
        "--config",
        config.to_str().unwrap(),
        "--tol",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
        "--assert",
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("adapt_certificate.json")).unwrap())
            .unwrap();
    assert!(summary["converged"].as_bool().unwrap());
    let bound = summary["certificate"]["uniform_norm_bound"]
        .as_f64()
        .unwrap();
    assert!(bound <= 1e-3);
}

#[test]
fn converge_needs_three_levels_and_fits_a_rate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out = dir.path().join("out");
    let output = run(&[
        "converge",
        "--config",
        config.to_str().unwrap(),
        "--refinements",
        "25,51",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2);

    let output = run(&[
        "converge",
        "--config",
        config.to_str().unwrap(),
        "--refinements",
        "25,51,101",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let rates: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rates.json")).unwrap()).unwrap();
    assert!(rates["slope"].as_f64().unwrap() >= 0.4);
}

#[test]
fn sweep_grid_is_deterministic_despite_concurrency() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &ramp_config());
    let out1 = dir.path().join("s1");
    let out2 = dir.path().join("s2");
    for out in [&out1, &out2] {
        let output = run(&[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--thetas",
            "0.5,0.75,1.0",
            "--step-grid",
            "16,32",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&output),
            0,
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let a = std::fs::read(out1.join("sweep.csv")).unwrap();
    let b = std::fs::read(out2.join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    // rows appear in deterministic grid order
    let text = String::from_utf8(a).unwrap();
    let thetas: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(thetas.len(), 6);
    assert!(thetas[0].starts_with("5.0") && thetas[5].starts_with("1.0"));
}
