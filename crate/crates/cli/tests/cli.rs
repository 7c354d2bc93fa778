use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_restarts"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const STEP: &str = r#"{"kind":"step_or_forever","run_time":1,"success_prob":0.01}"#;

#[test]
fn analyze_step_example() {
    let out = run(&["analyze", "--dist", STEP]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["delta"], 1.0);
    assert_eq!(v["expected_cost"], 100.0);
    assert_eq!(v["inv_rho"], 100.0);
}

#[test]
fn analyze_zeta_and_uniform() {
    let out = run(&["analyze", "--dist", "zeta2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["delta"], 1.0);

    let out = run(&["analyze", "--dist", r#"{"kind":"uniform_interval","lo":2,"hi":10}"#]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["delta"], 10.0);
    assert_eq!(v["expected_cost"], 6.0);
}

#[test]
fn analyze_without_finite_mass_fails() {
    let out = run(&["analyze", "--dist", r#"{"kind":"step_or_forever","run_time":1,"success_prob":0}"#]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error"));
}

#[test]
fn sequence_examples() {
    let out = run(&["sequence", "--strategy", "luby", "-n", "7"]);
    assert_eq!(stdout(&out), "1\n1\n2\n1\n1\n2\n4\n");
    let out = run(&["sequence", "--strategy", "fixed", "--delta", "3", "-n", "2"]);
    assert_eq!(stdout(&out), "3\n3\n");
    let out = run(&["sequence", "--strategy", "exponential", "-n", "3"]);
    assert_eq!(stdout(&out), "1\n2\n4\n");
}

#[test]
fn sequence_seeded_replay() {
    let a = run(&["sequence", "--strategy", "bin", "-n", "20", "--seed", "7"]);
    let b = run(&["sequence", "--strategy", "bin", "-n", "20", "--seed", "7"]);
    assert_eq!(stdout(&a), stdout(&b));
    let c = run(&["sequence", "--strategy", "bin", "-n", "20", "--seed", "8"]);
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn simulate_step_mean_and_determinism() {
    let args = [
        "simulate", "--dist", STEP, "--strategy", "fixed", "--delta", "1", "--trials", "20000",
        "--seed", "1",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,model,dist,param1,param2,trials,seed,mean,trimmed_mean,median,p90,p99,censored,analytic_opt,ratio_opt,ratio_opt_log"
    );
    let data = lines.next().unwrap();
    let mean: f64 = data.split(',').nth(8).unwrap().parse().unwrap();
    assert!((mean - 100.0).abs() < 5.0, "mean {mean}");
    // Bit-for-bit determinism across invocations.
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_jsonl_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("row.jsonl");
    let out = run(&[
        "simulate", "--dist", "zeta2", "--strategy", "luby", "--trials", "500", "--seed", "3",
        "--format", "jsonl", "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["kind"], "luby");
    assert_eq!(v["model"], "restart");
    assert_eq!(v["trials"], 500);
}

#[test]
fn simulate_wide_model() {
    let out = run(&[
        "simulate", "--dist", r#"{"kind":"step_or_forever","run_time":4,"success_prob":0.5}"#,
        "--model", "wide", "--strategy", "harmonic", "--trials", "2000", "--seed", "2",
        "--format", "jsonl",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert_eq!(v["model"], "wide");
    assert_eq!(v["kind"], "harmonic");
    assert!(v["mean"].as_f64().unwrap() > 4.0);
}

#[test]
fn sweep_runs_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    let row = |delta: f64| {
        serde_json::json!({
            "dist": {"kind": "step_or_forever", "run_time": delta, "success_prob": 0.5},
            "strategy": {"model": "restart", "schedule": {"kind": "fixed", "delta": delta}},
            "trials": 200,
            "seed": 9,
        })
    };
    std::fs::write(
        &cfg,
        serde_json::json!({"rows": [row(1.0), row(2.0), row(4.0)]}).to_string(),
    )
    .unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4, "header + 3 rows: {text}");
}

#[test]
fn config_file_supplies_defaults_and_cli_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "dist": {"kind": "step_or_forever", "run_time": 1, "success_prob": 0.5},
            "strategy": "fixed",
            "delta": 1.0,
            "trials": 50,
            "seed": 4,
        })
        .to_string(),
    )
    .unwrap();
    // Config alone.
    let a = run(&["simulate", "--config", cfg.to_str().unwrap(), "--format", "jsonl"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let v: serde_json::Value = serde_json::from_str(stdout(&a).lines().next().unwrap()).unwrap();
    assert_eq!(v["trials"], 50);
    // CLI flag wins over the file.
    let b = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--format", "jsonl", "--trials", "75",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&b).lines().next().unwrap()).unwrap();
    assert_eq!(v["trials"], 75);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"trails": 100}"#).unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--dist", "zeta2", "--strategy", "luby"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trails"), "stderr: {}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["analyze", "--dist", "{not json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--dist", "zeta2", "--strategy", "warp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("warp"));
    let out = run(&["nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn time_suffixes_parse() {
    // 600ms TTL: sleep 0.2 fits, so the run succeeds on attempt 1.
    let out = run(&[
        "run", "--strategy", "fixed", "--delta", "1", "--unit", "600ms", "--max-attempts", "1",
        "--", "sleep", "0.2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn run_exit_codes() {
    let out = run(&["run", "--strategy", "luby", "--unit", "100ms", "--", "true"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["attempts"], 1);
    assert_eq!(v["outcome"], "success");

    let out = run(&[
        "run", "--strategy", "fixed", "--delta", "1", "--unit", "100ms", "--max-attempts", "2",
        "--", "sleep", "10",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["run", "--strategy", "luby", "--unit", "50ms", "--", "/no/such/binary"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_seeded_ttl_replay() {
    let dir = tempfile::tempdir().unwrap();
    let log_a = dir.path().join("a.jsonl");
    let log_b = dir.path().join("b.jsonl");
    let args = |log: &std::path::Path| {
        vec![
            "run".to_string(),
            "--strategy".into(), "bin".into(),
            "--seed".into(), "7".into(),
            "--unit".into(), "10ms".into(),
            "--max-attempts".into(), "5".into(),
            "--log".into(), log.to_str().unwrap().to_string(),
            "--".into(), "sleep".into(), "30".into(),
        ]
    };
    let a = bin().args(args(&log_a)).output().unwrap();
    let b = bin().args(args(&log_b)).output().unwrap();
    assert_eq!(a.status.code(), Some(2));
    assert_eq!(b.status.code(), Some(2));
    let ttls = |p: &std::path::Path| -> Vec<f64> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["ttl_s"].as_f64().unwrap())
            .collect()
    };
    assert_eq!(ttls(&log_a), ttls(&log_b));
}
