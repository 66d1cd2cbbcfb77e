use std::path::PathBuf;
use std::process::{Command, Output};

use gkp_sweep::table::read_csv;
use serde_json::Value;

fn gkp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkp-readout"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gkp-readout-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn optimize_lambda_at_ten_db() {
    let out = gkp(&["optimize-lambda", "--delta-db", "10"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["lambda_opt"].as_f64().unwrap() - 0.0957).abs() < 1e-4);
    assert!((v["p_err_improved"].as_f64().unwrap() - 1.8997e-4).abs() < 1e-8);
}

#[test]
fn state_info_pure() {
    let dump = scratch("zero.json");
    let out = gkp(&["state-info", "--delta-db", "10", "--sigma", "0", "--dump", dump.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["delta_eff_db"].as_f64().unwrap() - 10.0).abs() < 0.1);
    assert!((v["purity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["converged"].as_bool().unwrap());
    let dumped: Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert!(dumped.is_object());
}

#[test]
fn fig1a_writes_csv_file() {
    let path = scratch("fig1a.csv");
    let out = gkp(&[
        "fig1a",
        "--set",
        "delta_db_min=9",
        "--set",
        "delta_db_max=10",
        "--set",
        "delta_db_points=2",
        "--set",
        "cutoff=150",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("strategy,delta_db,delta,kappa,sigma,"));
    let rows = read_csv(&text).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.converged_flag && r.cutoff_n == 150));
}

#[test]
fn json_format_on_stdout() {
    let out = gkp(&[
        "fig1b",
        "--set",
        "delta_db_min=10",
        "--set",
        "delta_db_max=11",
        "--set",
        "delta_db_points=2",
        "--set",
        "fixed_lambdas=0.1",
        "--set",
        "cutoff=150",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0]["purity"].is_f64() && rows[0]["lambda_used"].is_f64());
    assert!(rows[0]["cutoff_N"].is_u64());
}

#[test]
fn config_error_reports_line_and_field() {
    let path = scratch("bad.cfg");
    std::fs::write(&path, "# sweep\nrounds = 1\ncutoff = banana\n").unwrap();
    let out = gkp(&["fig1a", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = stderr_json(&out);
    assert_eq!(v["error"], "config");
    assert_eq!(v["line"], 3);
    assert_eq!(v["field"], "cutoff");
}

#[test]
fn usage_error_is_config_exit() {
    let out = gkp(&["fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn out_of_range_squeezing_needs_flag() {
    let base = ["fig1a", "--set", "delta_db_min=3", "--set", "delta_db_max=4", "--set", "delta_db_points=2"];
    let out = gkp(&base);
    assert_eq!(out.status.code(), Some(2));
    let out = gkp(&["fig1a", "--set", "delta_db_points=1"]);
    assert_eq!(stderr_json(&out)["field"], "delta_db_points");
}

#[test]
fn small_cutoff_flags_rows_and_exits_three() {
    let out = gkp(&[
        "fig1a",
        "--set",
        "cutoff=40",
        "--set",
        "delta_db_min=9",
        "--set",
        "delta_db_max=10",
        "--set",
        "delta_db_points=2",
        "--set",
        "rounds=1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let rows = read_csv(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| !r.converged_flag && r.p_err_simulated.is_none()));
    assert_eq!(stderr_json(&out)["error"], "convergence");
}

#[test]
fn validate_passes() {
    let out = gkp(&["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let checks: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(checks.as_array().unwrap().iter().all(|c| c["passed"] == true));
}
