use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_servesim"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn gen_small(dir: &Path) -> PathBuf {
    let trace = dir.join("t.jsonl");
    ok(&[
        "gen-trace",
        "--kind",
        "bursty",
        "--lambda-b",
        "150",
        "--lambda-v",
        "100",
        "--cv2",
        "4",
        "--duration",
        "3",
        "--seed",
        "9",
        "--out",
        trace.to_str().unwrap(),
    ]);
    trace
}

#[test]
fn gen_trace_writes_header_and_queries() {
    let out = ok(&[
        "gen-trace",
        "--kind",
        "time-varying",
        "--lambda1",
        "100",
        "--lambda2",
        "300",
        "--tau",
        "100",
        "--cv2",
        "2",
        "--duration",
        "2",
        "--slo-ms",
        "50",
        "--seed",
        "4",
    ]);
    let mut lines = out.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["spec"]["kind"], "time_varying");
    assert_eq!(header["spec"]["slo_us"], 50_000);
    let q: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(
        q["deadline_us"].as_u64().unwrap() - q["arrival_us"].as_u64().unwrap(),
        50_000
    );
    assert!(lines.count() > 100);
}

#[test]
fn simulate_writes_all_outputs_and_report_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_small(dir.path());
    let (report, dynamics, outcomes) = (
        dir.path().join("r.json"),
        dir.path().join("d.csv"),
        dir.path().join("o.jsonl"),
    );
    ok(&[
        "simulate",
        "--trace",
        trace.to_str().unwrap(),
        "--workers",
        "2",
        "--out",
        report.to_str().unwrap(),
        "--dynamics",
        dynamics.to_str().unwrap(),
        "--outcomes",
        outcomes.to_str().unwrap(),
    ]);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["config"]["sim"]["policy"], "slackfit");
    assert_eq!(r["config"]["sim"]["workers"], 2);
    let d = std::fs::read_to_string(&dynamics).unwrap();
    assert!(d.starts_with("t_ms,ingest_qps,accuracy,batch,queue_depth,workers\n"));
    assert_eq!(d.lines().count(), 1 + 30);

    let agg: serde_json::Value =
        serde_json::from_str(&ok(&["report", "--outcomes", outcomes.to_str().unwrap()])).unwrap();
    assert_eq!(agg["total"], r["summary"]["total"]);
    assert_eq!(agg["slo_attainment"], r["summary"]["slo_attainment"]);
    // Tightening every deadline past the SLO leaves nothing on time.
    let tight: serde_json::Value = serde_json::from_str(&ok(&[
        "report",
        "--outcomes",
        outcomes.to_str().unwrap(),
        "--tighten-us",
        "40000",
    ]))
    .unwrap();
    assert_eq!(tight["hits"], 0);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_small(dir.path());
    let args = [
        "simulate",
        "--trace",
        trace.to_str().unwrap(),
        "--policy",
        "maxbatch",
    ];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_small(dir.path());
    let cfg = data("run.toml");
    let from_file: serde_json::Value = serde_json::from_str(&ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]))
    .unwrap();
    assert_eq!(from_file["config"]["sim"]["policy"], "maxacc");
    assert_eq!(from_file["config"]["sim"]["workers"], 2);
    assert_eq!(from_file["config"]["sim"]["faults"][0]["at_us"], 1_000_000);
    let overridden: serde_json::Value = serde_json::from_str(&ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--policy",
        "minacc",
        "--workers",
        "3",
    ]))
    .unwrap();
    assert_eq!(overridden["config"]["sim"]["policy"], "minacc");
    assert_eq!(overridden["config"]["sim"]["workers"], 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_small(dir.path());
    let t = trace.to_str().unwrap();
    for args in [
        vec!["simulate", "--trace", t, "--policy", "greedy"],
        vec!["simulate", "--trace", t, "--policy", "fixed:nope"],
        vec!["simulate", "--trace", t, "--workers", "0"],
        vec!["simulate", "--trace", t, "--fault", "3s:w9"],
        vec!["simulate", "--trace", t, "--fault", "soon"],
        vec!["simulate", "--trace", "/no/such/trace.jsonl"],
        vec!["simulate"],
        vec![
            "gen-trace",
            "--kind",
            "bursty",
            "--lambda-b",
            "-5",
            "--duration",
            "1",
        ],
        vec!["memory", "--config", t],
        vec!["oracle", "--instance", t],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "wokers = 2\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        bad_cfg.to_str().unwrap(),
        "--trace",
        t,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("heavy.jsonl");
    ok(&[
        "gen-trace",
        "--kind",
        "bursty",
        "--lambda-b",
        "3000",
        "--duration",
        "2",
        "--out",
        trace.to_str().unwrap(),
    ]);
    let t = trace.to_str().unwrap();
    let args = [
        "simulate",
        "--trace",
        t,
        "--workers",
        "1",
        "--policy",
        "fixed:sub-5",
    ];
    let lenient = run(&args);
    assert_eq!(lenient.status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    let out = run(&strict);
    assert_eq!(out.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["summary"]["diverged"], true);
}

#[test]
fn oracle_reports_both_objectives() {
    let r: serde_json::Value = serde_json::from_str(&ok(&[
        "oracle",
        "--instance",
        data("low_load.json").to_str().unwrap(),
        "--policy",
        "slackfit",
    ]))
    .unwrap();
    let (p, o) = (
        r["policy_objective"].as_f64().unwrap(),
        r["oracle_objective"].as_f64().unwrap(),
    );
    assert!((o - 2.3).abs() < 1e-9);
    assert!(p <= o + 1e-9);
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    ok(&[
        "sweep",
        "--spec",
        data("grid.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 72);
    assert!(csv.starts_with("policy,kind,lambda,cv2,tau,seed,workers,"));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let csv = ok(&["sweep", "--spec", empty.to_str().unwrap()]);
    assert_eq!(csv.lines().count(), 1);

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "policies = [\"slackfit\", \"fixed:missing\"]\n[[traces]]\nkind = \"bursty\"\nduration_s = 1.0\nbase_rate = 10.0\nvariant_rate = 0.0\ncv2 = 1.0\n",
    )
    .unwrap();
    assert_eq!(
        run(&["sweep", "--spec", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn memory_reports_shared_footprint() {
    let r: serde_json::Value = serde_json::from_str(&ok(&[
        "memory",
        "--config",
        data("memory.toml").to_str().unwrap(),
    ]))
    .unwrap();
    assert_eq!(r["supernet_bytes"], 88_000_000u64 + 6 * 120_000);
    assert!(
        r["individual_bytes_estimate"].as_f64().unwrap() > r["supernet_bytes"].as_f64().unwrap()
    );
}

#[test]
fn serve_runs_a_short_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    ok(&[
        "gen-trace",
        "--kind",
        "bursty",
        "--lambda-b",
        "100",
        "--duration",
        "1",
        "--out",
        trace.to_str().unwrap(),
    ]);
    let r: serde_json::Value = serde_json::from_str(&ok(&[
        "serve",
        "--trace",
        trace.to_str().unwrap(),
        "--workers",
        "2",
        "--max-lag-ms",
        "50",
    ]))
    .unwrap();
    assert_eq!(r["config"]["mode"], "serve");
    assert_eq!(r["summary"]["total"], 100);
}
