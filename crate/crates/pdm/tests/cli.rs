//! Black-box tests of the `pdm` binary: exit codes, output files, and
//! flag handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdm"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn sample(extra: &str) -> String {
    format!(
        r#"{{
            "problem": {{
                "kind": "quadratic_consensus",
                "dim": 1,
                "centers": [[0.0], [2.0], [4.0]]
            }},
            "graph": {{ "kind": "ring", "vertices": 3 }},
            "schedule": {{ "kind": "static_full" }},
            "stepsize": {{ "mode": "per_iteration_norm", "tau": 0.1 }},
            "epsilon": 1e-9,
            "budget": 5000{extra}
        }}"#
    )
}

fn run_ok(output: &Output) -> i32 {
    output.status.code().expect("no exit code")
}

#[test]
fn solve_converges_with_exit_zero_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "exp.json", &sample(""));
    let trace = dir.path().join("trace.csv");
    let out = bin()
        .args(["solve", &config, "--trace", trace.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(run_ok(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,lambda,objective,primal_residual,full_residual,step_norm,p_minus_y,p_minus_yprev,dist_to_ref,active_count"
    );
    let rows = text.lines().count() - 1;
    assert!((1..=5000).contains(&rows));
    // stdout carries a JSON summary
    let summary: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("summary is JSON");
    assert_eq!(summary["stop"], "converged");
}

#[test]
fn solve_budget_exhausted_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = sample("")
        .replace("\"budget\": 5000", "\"budget\": 3")
        .replace("1e-9", "0.0");
    let config = write_config(dir.path(), "exp.json", &body);
    let out = bin().args(["solve", &config, "--quiet"]).output().unwrap();
    assert_eq!(run_ok(&out), 2);
    assert!(out.stdout.is_empty(), "quiet run must not print");
}

#[test]
fn malformed_tau_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = sample("").replace("\"tau\": 0.1", "\"tau\": 1.5");
    let config = write_config(dir.path(), "bad.json", &body);
    let out = bin().args(["solve", &config]).output().unwrap();
    assert_eq!(run_ok(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stepsize.tau"), "stderr: {stderr}");
}

#[test]
fn missing_config_exits_one() {
    let out = bin().args(["solve", "/nonexistent/exp.json"]).output().unwrap();
    assert_eq!(run_ok(&out), 1);
}

#[test]
fn verify_passes_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "exp.json", &sample(""));
    let out = bin().args(["verify", &config]).output().unwrap();
    assert_eq!(run_ok(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for check in ["contraction", "prox-optimality", "operator-norm-bound", "window-connectivity"] {
        assert!(stdout.contains(check), "missing {check}: {stdout}");
    }
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn seed_flag_reproduces_random_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let body = sample("").replace(
        r#"{ "kind": "static_full" }"#,
        r#"{ "kind": "random_with_core", "core": [0, 1], "extra_probability": 0.5, "seed": 1 }"#,
    );
    let config = write_config(dir.path(), "exp.json", &body);
    let run_with = |seed: &str, name: &str| {
        let trace = dir.path().join(name);
        let out = bin()
            .args([
                "solve",
                &config,
                "--seed",
                seed,
                "--quiet",
                "--trace",
                trace.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(run_ok(&out), 0);
        fs::read_to_string(trace).unwrap()
    };
    let a = run_with("7", "a.csv");
    let b = run_with("7", "b.csv");
    let c = run_with("8", "c.csv");
    assert_eq!(a, b, "same seed must reproduce the trace");
    assert_ne!(a, c, "different seed should change the schedule");
}

#[test]
fn bench_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = sample(r#", "bench": { "sizes": [3, 4], "rounds": 5 }"#);
    let config = write_config(dir.path(), "exp.json", &body);
    let out = bin().args(["bench", &config]).output().unwrap();
    assert_eq!(run_ok(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "agents,arcs,rounds,messages,phase1_us,phase2_us,phase3_us,total_us"
    );
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn ledger_requires_multi_agent_engine() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    let body = sample(&format!(
        r#", "outputs": {{ "ledger": "{}" }}"#,
        ledger.display()
    ));
    let config = write_config(dir.path(), "exp.json", &body);
    let out = bin().args(["solve", &config, "--quiet"]).output().unwrap();
    assert_eq!(run_ok(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("multi_agent"));

    let body = body.replace(
        "\"outputs\"",
        "\"engine\": \"multi_agent\", \"outputs\"",
    );
    let config = write_config(dir.path(), "exp3.json", &body);
    let out = bin().args(["solve", &config, "--quiet"]).output().unwrap();
    assert_eq!(run_ok(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&ledger).unwrap();
    assert!(text.lines().count() > 0);
    for line in text.lines().take(5) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["payload_hash"].is_string());
    }
}
