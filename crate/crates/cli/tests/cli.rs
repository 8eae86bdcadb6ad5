//! End-to-end tests that drive the compiled binary the way a shell user
//! would: a config document in, a report on stdout, artifacts under --out.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(config: &str, extra_args: &[&str]) -> (Option<i32>, String, String) {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).expect("write config");
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_distcurve"))
        .arg("--config")
        .arg(&path)
        .args(extra_args)
        .output()
        .expect("binary runs");
    (
        status.code(),
        String::from_utf8(stdout).expect("stdout is utf8"),
        String::from_utf8(stderr).expect("stderr is utf8"),
    )
}

fn report(stdout: &str) -> Value {
    serde_json::from_str(stdout).expect("stdout is a JSON report")
}

#[test]
fn schema_errors_exit_with_code_two() {
    let cases = [
        "{not json",
        r#"{"command":"symalg","family":"conformal","n":4,"extra":1}"#,
        r#"{"command":"symalg","family":"conformal"}"#,
        r#"{"command":"integrate","metric":{"name":"flat","n":3},"kind":"geodesic","x0":[0,0],"u0":[1,0,0]}"#,
        r#"{"command":"integrate","metric":{"name":"flat","n":3},"kind":"circle","x0":[0,0,0],"u0":[1,0,0]}"#,
        r#"{"command":"check","geometry":"einstein","metric":{"name":"flat","n":3},"points":[]}"#,
    ];
    for config in cases {
        let (code, stdout, stderr) = run(config, &[]);
        assert_eq!(code, Some(2), "config {config} gave stderr {stderr}");
        assert!(stdout.is_empty(), "schema errors must not emit a report");
        assert!(stderr.contains("config error"), "stderr was {stderr}");
    }
}

#[test]
fn missing_fixture_file_is_a_config_error() {
    let config = r#"{"command":"check","geometry":"legendrean","fixture":"/nonexistent/f.json"}"#;
    let (code, _, stderr) = run(config, &[]);
    assert_eq!(code, Some(2), "stderr {stderr}");
}

#[test]
fn reports_are_byte_identical_for_identical_inputs() {
    let fixture = fixtures_dir().join("d7_lambda1.json");
    let config = format!(
        r#"{{"command":"check","geometry":"legendrean","fixture":{:?}}}"#,
        fixture.to_str().unwrap()
    );
    let (c1, first, _) = run(&config, &["--seed", "23"]);
    let (c2, second, _) = run(&config, &["--seed", "23"]);
    assert_eq!(c1, Some(0));
    assert_eq!(c2, Some(0));
    assert_eq!(first, second, "same config and seed must reproduce bytes");

    let (c3, other_seed, _) = run(&config, &["--seed", "24"]);
    assert_eq!(c3, Some(0));
    assert_ne!(first, other_seed, "the seed must reach the direction sweep");
}

#[test]
fn model_symmetry_dimensions_match_the_catalog() {
    let cases = [
        ("conformal", 4, 6, 9),
        ("legendrean", 2, 4, 11),
        ("cr", 2, 4, 11),
    ];
    for (family, n, sym, moduli) in cases {
        let config = format!(r#"{{"command":"symalg","family":"{family}","n":{n}}}"#);
        let (code, stdout, stderr) = run(&config, &[]);
        assert_eq!(code, Some(0), "{family} n={n}: {stderr}");
        let rep = report(&stdout);
        assert_eq!(rep["pass"], Value::Bool(true));
        assert_eq!(rep["payload"]["sym_dim"], serde_json::json!(sym));
        assert_eq!(rep["payload"]["moduli_dim"], serde_json::json!(moduli));
    }
}

#[test]
fn flat_circle_integration_passes_and_writes_artifacts() {
    let out = tempfile::tempdir().expect("tempdir");
    let config = r#"{"command":"integrate","id":"flat-circle","metric":{"name":"flat","n":3},"kind":"circle","x0":[0,0,0],"u0":[1,0,0],"c0":[0,1,0],"arc":6.283185307179586,"step":0.001}"#;
    let (code, stdout, stderr) = run(config, &["--out", out.path().to_str().unwrap()]);
    assert_eq!(code, Some(0), "stderr {stderr}");

    let rep = report(&stdout);
    assert_eq!(rep["pass"], Value::Bool(true));
    let residual = rep["payload"]["max_residual"].as_f64().unwrap();
    assert!(residual < 1e-6, "flow residual {residual}");

    let written = std::fs::read_to_string(out.path().join("flat-circle.report.json")).unwrap();
    assert_eq!(written, stdout, "the written report mirrors stdout");

    let csv = std::fs::read_to_string(out.path().join("flat-circle.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,x1,x2,x3,u1,u2,u3,c1,c2,c3,e_norm"),
        "trace header"
    );
    assert_eq!(
        lines.count(),
        rep["payload"]["samples"].as_u64().unwrap() as usize
    );
}

#[test]
fn sphere_geodesic_matches_the_great_circle_form() {
    // Radial geodesics of g = 4 (1 + |x|^2)^-2 dx^2 from the origin reach
    // coordinate radius tan(t / 2) at arclength t.
    let config = r#"{"command":"integrate","metric":{"name":"sphere","n":3},"kind":"geodesic","x0":[0,0,0],"u0":[1,0,0],"arc":1.0,"step":0.001}"#;
    let (code, stdout, stderr) = run(config, &[]);
    assert_eq!(code, Some(0), "stderr {stderr}");
    let rep = report(&stdout);
    let x = rep["payload"]["final_x"].as_array().unwrap();
    let gap = (x[0].as_f64().unwrap() - (0.5_f64).tan()).abs();
    assert!(gap < 1e-6, "closed-form gap {gap}");
    assert!(x[1].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn the_tol_flag_overrides_the_config_document() {
    let config = r#"{"command":"integrate","metric":{"name":"flat","n":3},"kind":"circle","x0":[0,0,0],"u0":[1,0,0],"c0":[0,1,0],"tol":1e-6}"#;
    let (code, stdout, _) = run(config, &["--tol", "1e-12"]);
    assert_eq!(code, Some(1), "the tightened gate must fail the run");
    let rep = report(&stdout);
    assert_eq!(rep["pass"], Value::Bool(false));
    assert_eq!(rep["payload"]["tol"].as_f64(), Some(1e-12));
}

#[test]
fn einstein_check_separates_the_catalog() {
    let config = r#"{"command":"check","geometry":"einstein","metric":{"name":"fubini_study","n":4},"points":[[0.1,0.0,-0.2,0.05],[0.0,0.3,0.1,0.0],[-0.15,0.1,0.0,0.2]]}"#;
    let (code, stdout, stderr) = run(config, &[]);
    assert_eq!(code, Some(0), "stderr {stderr}");
    let rep = report(&stdout);
    let lambda = rep["payload"]["lambda"].as_f64().unwrap();
    assert!((lambda - 1.0).abs() < 1e-9, "scale {lambda}");

    let config = r#"{"command":"check","geometry":"einstein","metric":{"name":"non_einstein_diag","n":4},"points":[[1.0,0.0,-0.2,0.05],[0.9,0.3,0.1,0.0]]}"#;
    let (code, stdout, _) = run(config, &[]);
    assert_eq!(code, Some(1), "detection must exit 1, not error out");
    assert_eq!(report(&stdout)["pass"], Value::Bool(false));
}

#[test]
fn fixture_checks_recover_the_recorded_scales() {
    let cases = [
        ("legendrean", "d7_lambda1.json", 1.0),
        ("legendrean", "n72_lambda0.json", 0.0),
        ("cr", "cr_tube_lambda1.json", 1.0),
        ("cr", "cr_n72_lambda0.json", 0.0),
    ];
    for (geometry, file, want) in cases {
        let fixture = fixtures_dir().join(file);
        let config = format!(
            r#"{{"command":"check","geometry":"{geometry}","fixture":{:?}}}"#,
            fixture.to_str().unwrap()
        );
        let (code, stdout, stderr) = run(&config, &[]);
        assert_eq!(code, Some(0), "{file}: {stderr}");
        let rep = report(&stdout);
        assert_eq!(rep["pass"], Value::Bool(true), "{file}");
        let lambda = rep["payload"]["lambda"].as_f64().unwrap();
        assert!((lambda - want).abs() < 1e-9, "{file} scale {lambda}");
        assert_eq!(rep["payload"]["directions_all_pass"], Value::Bool(true));
    }
}

#[test]
fn suite_command_reports_every_scenario() {
    let config = format!(
        r#"{{"command":"suite","fixtures_dir":{:?}}}"#,
        fixtures_dir().to_str().unwrap()
    );
    let (code, stdout, stderr) = run(&config, &[]);
    assert_eq!(code, Some(0), "stderr {stderr}");
    let rep = report(&stdout);
    let scenarios = rep["payload"]["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 10);
    for s in scenarios {
        assert_eq!(s["passed"], Value::Bool(true), "scenario {}", s["name"]);
    }
}
