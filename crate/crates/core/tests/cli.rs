use std::process::Command;

use lagphase::cli::{run_verify_with, Cli, RunConfig, VerifyHooks, EXIT_CHECK_FAILED};
use lagphase::phasepoly::{zstar, ZstarMode};
use lagphase::symfun::Rational;
use num_traits::One;
use clap::Parser;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagphase"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn verify_default_passes_and_reports_zstar_of_ones() {
    let (code, out, _) = run(&["verify", "--seed", "42"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["prng"], "ChaCha8Rng");
    let six = v["zstar_ones"].as_array().unwrap().iter().find(|z| z["n"] == 6).unwrap();
    assert_eq!(six["value"], "192");
}

#[test]
fn injected_fault_is_reported_with_counterexample() {
    let cli = Cli::try_parse_from(["lagphase", "verify"]).unwrap();
    let config = RunConfig::from_command_line(&cli).unwrap();
    let hooks = VerifyHooks {
        zstar_closed: |a| zstar(a, ZstarMode::ClosedForm) + Rational::one(),
    };
    let out = run_verify_with(&config, hooks);
    assert_eq!(out.status, EXIT_CHECK_FAILED);
    let v: serde_json::Value = serde_json::from_str(&out.body).unwrap();
    assert_eq!(v["passed"], false);
    let suite = v["suites"].as_array().unwrap().iter().find(|s| s["name"] == "zstar_modes").unwrap();
    assert!(suite["failures"].as_u64().unwrap() > 0);
    assert!(!suite["counterexample"]["a"].as_array().unwrap().is_empty());
    assert!(out.messages.iter().any(|m| m.contains("counterexample")));
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        vec!["verify", "--seed", "7"],
        vec!["scan-eps"],
        vec!["solve", "--n", "4", "--theta", "1.5pi", "--family", "iso", "--beta", "3", "--grid", "3"],
    ] {
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first.0, 0, "{args:?}: {}", first.2);
        assert_eq!(first.1, second.1, "{args:?}");
    }
}

#[test]
fn scan_csv_round_trips_and_has_expected_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let (code, _, err) = run(&["scan-eps", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(err.contains("crossing"));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["eps", "m", "m_closed_form", "abs_diff"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 97);
    assert!((rows[0][1] - 5.0).abs() < 1e-10);
    let end = (16.0 + 4.0 * 3.0f64.sqrt()) / 13.0;
    assert!((rows[96][1] - end).abs() < 1e-9);
    // Shortest round-trip formatting: reprinting reproduces the text.
    let text = std::fs::read_to_string(&path).unwrap();
    let second_line = text.lines().nth(2).unwrap();
    let reprinted: Vec<String> = second_line.split(',').map(|f| format!("{:?}", f.parse::<f64>().unwrap())).collect();
    assert_eq!(reprinted.join(","), second_line);
}

#[test]
fn solve_closed_case_json() {
    let a = 1.0 / 3.0f64.sqrt();
    let list = format!("{a:?},{a:?},{a:?}");
    let (code, out, err) = run(&["solve", "--n", "3", "--theta", "pi/2", "--a", &list, "--beta", "2", "--grid", "5"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["m"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!(v["route_agreement"]["max_gap"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["schema_version"], 1);
    assert!(v["verification"]["passed"].as_bool().unwrap());
    assert!(v["decay_fit"]["m_est"].is_number());
}

#[test]
fn solve_beta_one_is_flat() {
    let (code, out, err) = run(&["solve", "--n", "3", "--theta", "pi/2", "--family", "iso", "--beta", "1", "--grid", "4"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for row in v["trajectory"].as_array().unwrap() {
        assert_eq!(row["psi_numeric"].as_f64().unwrap(), 1.0);
        assert_eq!(row["psi_implicit"].as_f64().unwrap(), 1.0);
    }
    assert!(v["verification"]["min_h_minus_theta"].as_f64().unwrap().abs() < 1e-13);
    assert!(v["decay_fit"].is_null());
}

#[test]
fn inadmissible_endpoint_exits_nonzero() {
    let eps = format!("eps:{:?}", std::f64::consts::PI / 12.0);
    let (code, out, err) = run(&["solve", "--family", &eps]);
    assert_eq!(code, 2);
    assert!(err.contains("klass=in_A0_only"));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["klass"], "in_A0_only");
}

#[test]
fn invalid_input_exits_two() {
    assert_eq!(run(&["solve", "--exact", "--family", "iso", "--n", "3", "--theta", "pi/2"]).0, 2);
    assert_eq!(run(&["solve", "--n", "3", "--theta", "0.3", "--family", "iso"]).0, 2);
    assert_eq!(run(&["solve", "--a", "1,2,4", "--theta", "pi"]).0, 2);
    assert_eq!(run(&["solve", "--family", "iso", "--n", "3", "--theta", "pi/2", "--beta", "0.5"]).0, 2);
    assert_eq!(run(&["scan-eps", "--grid", "1"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["verify", "--exact"]).0, 0);
}
