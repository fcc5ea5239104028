//! End-to-end tests of the binary: exit codes, report JSON shape, byte-level
//! determinism of CSV artifacts, and fail-fast validation without partial
//! output.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdentropy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn analyze_preset_succeeds() {
    let out = run(&["analyze", "--preset", "fig1a", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["command"], "analyze");
    assert_eq!(json["results"]["n_components"], 2);
    assert_eq!(json["results"]["no_cross_component_edges"], true);
    assert!(json["scenario_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn analyze_chain_reports_cross_edges_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.txt");
    std::fs::write(
        &path,
        "network.inline = A -> B @ 1 p1 ; B -> C @ 1 p1\n\
         grid.n = 10\ninit.kind = uniform\ninit.values = 1, 1, 1\n",
    )
    .unwrap();
    let out = run(&["analyze", "--scenario", path.to_str().unwrap(), "--quiet"]);
    // The analysis itself succeeded; the verdict is in the report.
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["results"]["no_cross_component_edges"], false);
}

#[test]
fn malformed_scenario_exits_2_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "network.inline = S1 -> S2 @ -1 p1\ngrid.n = 10\n").unwrap();
    let out = run(&["analyze", "--scenario", path.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    let json = stdout_json(&out);
    assert_eq!(json["kind"], "validation");
    assert!(json["error"].as_str().unwrap().contains("positive"));
}

#[test]
fn validation_failure_writes_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.txt");
    // Valid network but an unknown key: must fail before any run starts.
    std::fs::write(
        &scenario,
        "network.inline = S1 <=> S2 @ 1 p1\ngrid.n = 10\n\
         init.kind = uniform\ninit.values = 1, 1\nsim.dtx = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        !out_dir.join("trajectory.csv").exists(),
        "partial output written on validation failure"
    );
}

#[test]
fn equilibrium_totals_flag() {
    let out = run(&[
        "equilibrium",
        "--preset",
        "thm2-measurable",
        "--totals",
        "74",
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["results"]["method"], "closed-form");
    let u = json["results"]["u_inf"].as_array().unwrap();
    assert!((u[0].as_f64().unwrap() - 16.0).abs() < 1e-9);
    assert!((u[1].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!((u[2].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn simulate_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("short.txt");
    std::fs::write(
        &scenario,
        "preset = remark-2x2-disjoint\nsim.t_end = 1.0\nsim.record_every = 200\n",
    )
    .unwrap();
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        csvs.push(std::fs::read(out_dir.join("trajectory.csv")).unwrap());
        assert!(out_dir.join("report.json").exists());
        assert!(out_dir.join("alpha_p1.csv").exists());
        assert!(out_dir.join("diffusion_S1.csv").exists());
    }
    assert_eq!(csvs[0], csvs[1], "trajectory CSV must be byte-identical");
}

#[test]
fn oversized_time_step_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("big_dt.txt");
    std::fs::write(&scenario, "preset = thm2-measurable\nsim.dt = 10\nsim.t_end = 20\n").unwrap();
    let out = run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let json = stdout_json(&out);
    assert_eq!(json["kind"], "numerical-quality");
}

#[test]
fn probe_runs_on_preset() {
    let out = run(&[
        "probe",
        "--preset",
        "thm2-measurable",
        "--n",
        "50",
        "--seed",
        "5",
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert!(json["results"]["min_ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(json["results"]["seed"], 5);
}

#[test]
fn sweep_writes_csv_with_contract_header() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sweep.txt");
    std::fs::write(
        &scenario,
        "preset = thm2-measurable\nsim.t_end = 2.0\nsim.record_every = 100\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--scenario",
        scenario.to_str().unwrap(),
        "--fractions",
        "1.0",
        "--seeds",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "omega1,omega2,lambda,r2");
    assert_eq!(lines.count(), 1); // single fraction, single seed
    let json = stdout_json(&out);
    assert_eq!(json["results"]["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn scenario_and_preset_flags_are_exclusive() {
    let out = run(&["analyze", "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    let chain = Path::new("does-not-exist.txt");
    let out = run(&["analyze", "--scenario", chain.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
}
