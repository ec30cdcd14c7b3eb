use proptest::prelude::*;
use servesim_core::metrics::{parse_outcomes, Outcome, SimReport};
use servesim_core::policy::PolicyKind;
use servesim_core::profile::{parse_catalog, Catalog, SubnetId};
use servesim_core::sim::{parse_faults, run, run_logged, sustainable_qps, SimConfig};
use servesim_core::sweep::{rows_to_csv, run_sweep, SweepSpec};
use servesim_core::tracegen::{generate, Trace, TraceSpec};

fn policies() -> Vec<PolicyKind> {
    let mut kinds = vec![
        PolicyKind::SlackFit,
        PolicyKind::MaxBatch,
        PolicyKind::MaxAcc,
        PolicyKind::MinAcc,
    ];
    kinds.extend(
        Catalog::synthetic_default()
            .subnets()
            .iter()
            .map(|s| PolicyKind::Fixed(s.id.clone())),
    );
    kinds
}

/// Checks everything a run must satisfy regardless of policy or load.
fn check_invariants(trace: &Trace, cfg: &SimConfig, r: &SimReport) {
    let agg = r.aggregates();
    assert_eq!(agg.total as usize, trace.len());
    assert_eq!(agg.hits + agg.misses + agg.drops, agg.total);
    assert_eq!(r.outcomes.len(), trace.len());

    let cat = &cfg.catalog;
    for o in &r.outcomes {
        match o.outcome {
            Outcome::Hit => {
                assert!(o.completion_us.unwrap() <= o.deadline_us);
                let acc = o.accuracy.unwrap();
                assert!(cat.subnets().iter().any(|s| s.accuracy == acc));
            }
            Outcome::Miss => assert!(o.completion_us.unwrap() > o.deadline_us),
            Outcome::Dropped => assert!(o.accuracy.is_none()),
        }
    }

    let mut per_worker = vec![Vec::new(); cfg.workers];
    for b in &r.batches {
        let rec = &cat.subnets()[b.subnet];
        let lat = rec.latency(b.profiled_batch).unwrap();
        let extra = if b.switched {
            cfg.actuation_delay_us
        } else {
            0
        };
        assert_eq!(b.end_us - b.start_us, lat + extra);
        assert!(b.count >= 1 && b.count as u32 <= b.profiled_batch);
        assert_eq!(b.members.len(), b.count);
        per_worker[b.worker].push((b.start_us, b.end_us));
    }
    for spans in &mut per_worker {
        spans.sort();
        assert!(
            spans.windows(2).all(|w| w[0].1 <= w[1].0),
            "worker ran two batches at once"
        );
    }
    let served: usize = r.batches.iter().map(|b| b.count).sum();
    assert_eq!(served as u64, agg.hits + agg.misses);
}

#[test]
fn every_policy_keeps_run_invariants() {
    let trace = generate(&TraceSpec::bursty(1500.0, 2000.0, 4.0, 3.0, 5)).unwrap();
    for kind in policies() {
        let cfg =
            SimConfig::new(Catalog::synthetic_default(), kind, 4).with_actuation_delay_us(500);
        check_invariants(&trace, &cfg, &run(&trace, &cfg).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_runs_keep_invariants(
        base in 0.0f64..3000.0,
        variant in 0.0f64..6000.0,
        cv2 in 0.5f64..8.0,
        workers in 1usize..6,
        policy in 0usize..10,
        seed in any::<u64>(),
        fault_ms in proptest::option::of(0u64..1500),
    ) {
        let trace = generate(&TraceSpec::bursty(base, variant, cv2, 1.5, seed)).unwrap();
        let mut cfg = SimConfig::new(Catalog::synthetic_default(), policies()[policy].clone(), workers);
        if let Some(ms) = fault_ms {
            cfg = cfg.with_faults(parse_faults(&format!("{ms}ms:w0")).unwrap());
        }
        let r = run(&trace, &cfg).unwrap();
        check_invariants(&trace, &cfg, &r);
        prop_assert_eq!(&r, &run(&trace, &cfg).unwrap());
    }
}

#[test]
fn light_load_is_fully_served_at_top_accuracy() {
    let trace = generate(&TraceSpec::bursty(50.0, 0.0, 1.0, 5.0, 1)).unwrap();
    let cat = Catalog::synthetic_default();
    let top = cat.subnets().last().unwrap().accuracy;
    let r = run(&trace, &SimConfig::new(cat, PolicyKind::SlackFit, 2)).unwrap();
    assert_eq!(r.aggregates().slo_attainment, 1.0);
    assert!((r.aggregates().mean_serving_accuracy.unwrap() - top).abs() < 1e-9);
}

#[test]
fn overload_on_largest_subnet_diverges() {
    let cat = Catalog::synthetic_default();
    let top = cat.subnets().last().unwrap().id.clone();
    let rate = 1.5 * sustainable_qps(&cat, &top, 2).unwrap();
    let trace = generate(&TraceSpec::bursty(rate, 0.0, 1.0, 5.0, 1)).unwrap();
    let r = run(&trace, &SimConfig::new(cat, PolicyKind::Fixed(top), 2)).unwrap();
    assert!(r.summary.diverged);
}

#[test]
fn killed_workers_receive_nothing_afterwards() {
    let trace = generate(&TraceSpec::bursty(1000.0, 500.0, 2.0, 4.0, 3)).unwrap();
    let cfg = SimConfig::new(Catalog::synthetic_default(), PolicyKind::SlackFit, 4)
        .with_faults(parse_faults("1s:w0,2s:w1").unwrap());
    let r = run_logged(&trace, &cfg).unwrap();
    for b in &r.batches {
        match b.worker {
            0 => assert!(b.start_us < 1_000_000),
            1 => assert!(b.start_us < 2_000_000),
            _ => {}
        }
    }
    let last = r.dynamics.last().unwrap();
    assert_eq!(last.workers, 2);
    assert!(!r.decisions.is_empty());
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cat = Catalog::synthetic_default();
    // The CSV carries ids, accuracy, FLOPs and latency; configs stay in code.
    let back = parse_catalog(&cat.to_csv()).unwrap();
    for (a, b) in back.subnets().iter().zip(cat.subnets()) {
        assert_eq!(
            (&a.id, a.accuracy, a.profile()),
            (&b.id, b.accuracy, b.profile())
        );
    }
    assert_eq!(back.len(), cat.len());

    let trace = generate(&TraceSpec::spikes(200.0, 400.0, 2.0, 2.0, 6.0, 4)).unwrap();
    let path = dir.path().join("trace.jsonl");
    trace.save(&path).unwrap();
    assert_eq!(Trace::load(&path).unwrap(), trace);

    let r = run(&trace, &SimConfig::new(cat, PolicyKind::MaxAcc, 2)).unwrap();
    assert_eq!(parse_outcomes(&r.outcomes_jsonl()).unwrap(), r.outcomes);
    let json: serde_json::Value = serde_json::from_str(&r.report_json()).unwrap();
    assert_eq!(json["summary"]["total"], trace.len());
}

#[test]
fn sweep_rows_match_individual_runs() {
    let spec = SweepSpec::parse(
        r#"
policies = ["slackfit", "fixed:sub-2"]
seeds = [3]
workers = 4

[[traces]]
kind = "bursty"
duration_s = 2.0
base_rate = 800.0
variant_rate = [400.0, 1200.0]
cv2 = 4.0
"#,
    )
    .unwrap();
    let cat = Catalog::synthetic_default();
    let rows = run_sweep(&spec, &cat).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(
        rows_to_csv(&rows),
        rows_to_csv(&run_sweep(&spec, &cat).unwrap())
    );

    let cells = spec.cells(&cat).unwrap();
    for (cell, row) in cells.iter().zip(&rows) {
        let r = run(&generate(&cell.trace).unwrap(), &cell.config).unwrap();
        assert_eq!(row.slo_attainment, r.aggregates().slo_attainment);
        assert_eq!(row.mean_accuracy, r.aggregates().mean_serving_accuracy);
    }
    assert!(rows.iter().any(|r| r.policy == "fixed:sub-2"));
    assert!(cat.get(&SubnetId::new("sub-2")).is_some());
}
