use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sppe_core::io::save_state;
use sppe_core::{make_grid, PairFn, Params};

fn sppe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sppe")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn constants_with_unit_sobolev() {
    let v = json(&sppe(&["constants", "--p", "2", "--lambda", "1", "--sobolev", "1"]));
    let l0 = v["lambda0"].as_f64().unwrap();
    let exact = 3.0 * 3f64.sqrt() * std::f64::consts::PI / 64.0;
    assert!((l0 - exact).abs() < 1e-15);
    assert!((l0 - 0.25517).abs() < 1e-3 * 0.25517);
    assert_eq!(v["sobolev_source"], "override");
    assert_eq!(v["nonexist_threshold"].as_f64(), Some(4.0));
}

#[test]
fn constants_above_p_bar_report_infinite_threshold() {
    let v = json(&sppe(&["constants", "--p", "2.5", "--sobolev", "1"]));
    assert_eq!(v["lambda0_bar"], "inf");
}

#[test]
fn invalid_exponent_is_a_config_error() {
    let out = sppe(&["solve", "--p", "3.5", "--mu11", "0.05", "--mu22", "0.1", "--mu12", "0.05"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must lie"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(sppe(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sppe(&["solve", "--p", "2.5"]).status.code(), Some(2));
    assert_eq!(sppe(&["verify", "/nonexistent/state.json"]).status.code(), Some(2));
}

#[test]
fn unavailable_branch_is_a_solver_failure() {
    let out = sppe(&["two-solutions", "--p", "2.5", "--mu11", "0.05", "--mu22", "0.1", "--mu12", "0.05", "--n", "200", "--r-max", "20"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_zero_state() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(10.0, 100).unwrap();
    let prm = Params::new(1.0, 2.2, 0.1, 0.2, 0.05).unwrap();
    let side = save_state(dir.path(), "zero", &PairFn::zeros(&g), &prm).unwrap();
    let v = json(&sppe(&["verify", side.to_str().unwrap()]));
    assert_eq!(v["identities"]["nehari_residual"].as_f64(), Some(0.0));
    assert_eq!(v["identities"]["pohozaev_residual"].as_f64(), Some(0.0));
    assert_eq!(v["energy"].as_f64(), Some(0.0));
}

#[test]
fn solve_writes_state_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let v = json(&sppe(&[
        "--out", out.to_str().unwrap(), "solve", "--p", "2.5", "--mu11", "0.05", "--mu22", "0.1", "--mu12", "0.05",
        "--n", "1000", "--r-max", "20",
    ]));
    assert!(v["solution"]["energy"].as_f64().unwrap() > 0.0);
    assert!(v["solution"]["identity"]["nehari_residual"].as_f64().unwrap() < 1e-8);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config"]["grid"]["n"], 1000);
    let again = json(&sppe(&["verify", out.join("solution.json").to_str().unwrap()]));
    let e = again["energy"].as_f64().unwrap();
    assert!((e - v["solution"]["energy"].as_f64().unwrap()).abs() < 1e-9 * e);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"params":{"lambda":1,"p":2.5,"mu11":0.05,"mu22":0.1,"mu12":0.05},"grid":{"r_max":20,"n":400}}"#,
    )
    .unwrap();
    let v = json(&sppe(&["scalar", "--config", cfg.to_str().unwrap(), "--mu", "0.01"]));
    assert_eq!(v["mu"].as_f64(), Some(0.01));
    assert_eq!(v["nehari_class"], "MINUS");
    fs::write(&cfg, r#"{"params":{"lambda":1,"p":2.5}}"#).unwrap();
    assert_eq!(sppe(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

fn write_sweep_inputs(dir: &Path, spec: &str) -> (String, String) {
    let grid = dir.join("grid.json");
    let cfg = dir.join("cfg.json");
    fs::write(&grid, spec).unwrap();
    fs::write(&cfg, r#"{"params":{"lambda":1,"p":2,"mu11":1,"mu22":1,"mu12":1},"grid":{"r_max":20,"n":500},"rng_seed":7}"#)
        .unwrap();
    (grid.to_str().unwrap().to_owned(), cfg.to_str().unwrap().to_owned())
}

#[test]
fn sweep_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (grid, cfg) = write_sweep_inputs(
        dir.path(),
        r#"{"p":[2.2,2.5],"lambda":[1],"mu11":[0.05],"mu22":[0.1,0.2],"mu12":[0.05],
            "tasks":{"solve":true,"certify":true,"nonexist":true}}"#,
    );
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let res = sppe(&["--threads", threads, "--out", out.to_str().unwrap(), "sweep", &grid, "--config", &cfg]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(fs::read(out.join("sweep.csv")).unwrap());
        assert!(out.join("manifest.json").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines().skip(1) {
        assert!(!(line.contains("CERTIFIED") && line.contains("ALL_DECAYED")));
    }
}

#[test]
fn empty_sweep_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let (grid, cfg) = write_sweep_inputs(dir.path(), r#"{"p":[],"lambda":[1],"mu11":[0.1],"mu22":[0.1],"mu12":[0.1]}"#);
    let out = sppe(&["sweep", &grid, "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("p,lambda,mu11,mu22,mu12,"));
}

#[test]
fn sweep_cell_errors_stay_in_their_row() {
    let dir = tempfile::tempdir().unwrap();
    let (grid, cfg) = write_sweep_inputs(
        dir.path(),
        r#"{"p":[2.5],"lambda":[1],"mu11":[0.05],"mu22":[0.1],"mu12":[0.05],
            "tasks":{"solve":false,"certify":false,"two_solutions":true}}"#,
    );
    let out = sppe(&["sweep", &grid, "--config", &cfg]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let row = rdr.records().next().unwrap().unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| row.get(headers.iter().position(|h| h == name).unwrap()).unwrap().to_owned();
    assert_eq!(col("two_status"), "failed");
    assert!(col("error").contains("two-solutions"));
}
