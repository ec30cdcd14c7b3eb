//! Deterministic discrete-event simulator of the router and its workers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{SimReport, SAMPLE_INTERVAL_US};
use crate::policy::{Policy, PolicyKind};
use crate::profile::{build_buckets, Catalog, SubnetId, DEFAULT_BUCKET_COUNT};
use crate::router::{Router, RouterSettings};
use crate::tracegen::Trace;
use crate::Micros;

/// Kill `worker` at `at_us`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fault {
    pub at_us: Micros,
    pub worker: usize,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us:w{}", self.at_us, self.worker)
    }
}

impl FromStr for Fault {
    type Err = Error;

    /// `<time><unit>:w<id>` with unit `s`, `ms` or `us`, e.g. `12s:w0`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad fault `{s}`, expected e.g. 12s:w0"));
        let (time, worker) = s.trim().split_once(':').ok_or_else(bad)?;
        let worker: usize = worker
            .trim()
            .strip_prefix('w')
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let time = time.trim();
        let (num, scale) = if let Some(n) = time.strip_suffix("ms") {
            (n, 1e3)
        } else if let Some(n) = time.strip_suffix("us") {
            (n, 1.0)
        } else if let Some(n) = time.strip_suffix('s') {
            (n, 1e6)
        } else {
            return Err(bad());
        };
        let v: f64 = num.parse().map_err(|_| bad())?;
        if !v.is_finite() || v < 0.0 || v * scale > u64::MAX as f64 / 2.0 {
            return Err(bad());
        }
        Ok(Fault {
            at_us: (v * scale).round() as Micros,
            worker,
        })
    }
}

/// Parses a comma-separated fault schedule; an empty string is no faults.
pub fn parse_faults(s: &str) -> Result<Vec<Fault>> {
    let mut faults = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Fault>>>()?;
    faults.sort();
    Ok(faults)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub workers: usize,
    pub actuation_delay_us: Micros,
    pub policy: PolicyKind,
    pub bucket_count: usize,
    pub dispatch_overhead_us: Micros,
    pub faults: Vec<Fault>,
    pub catalog: Catalog,
}

impl SimConfig {
    pub fn new(catalog: Catalog, policy: PolicyKind, workers: usize) -> Self {
        SimConfig {
            workers,
            actuation_delay_us: 0,
            policy,
            bucket_count: DEFAULT_BUCKET_COUNT,
            dispatch_overhead_us: 0,
            faults: Vec::new(),
            catalog,
        }
    }

    pub fn with_actuation_delay_us(mut self, us: Micros) -> Self {
        self.actuation_delay_us = us;
        self
    }

    pub fn with_faults(mut self, faults: Vec<Fault>) -> Self {
        self.faults = faults;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if let Some(f) = self.faults.iter().find(|f| f.worker >= self.workers) {
            return Err(Error::Config(format!(
                "fault targets w{} but only {} workers exist",
                f.worker, self.workers
            )));
        }
        build_buckets(&self.catalog, self.bucket_count)?;
        Policy::new(self.policy.clone(), &self.catalog)?;
        Ok(())
    }

    /// Config echo stored in every report.
    pub fn echo(&self, trace: &Trace) -> serde_json::Value {
        serde_json::json!({
            "mode": "simulate",
            "sim": self,
            "trace_spec": trace.spec,
            "trace_len": trace.len(),
            "trace_duration_us": trace.duration_us,
        })
    }
}

/// Queries per second `worker_count` workers sustain on one subnet.
pub fn sustainable_qps(catalog: &Catalog, subnet: &SubnetId, worker_count: usize) -> Result<f64> {
    let s = catalog
        .get(subnet)
        .ok_or_else(|| Error::UnknownSubnet(subnet.to_string()))?;
    Ok(worker_count as f64 * s.peak_throughput())
}

/// Typical relative deadline of a trace: the spec SLO if known, else the
/// mean `deadline - arrival`.
pub fn trace_slo_us(trace: &Trace) -> Micros {
    if let Some(spec) = &trace.spec {
        return spec.slo_us;
    }
    if trace.is_empty() {
        return 0;
    }
    let sum: u128 = trace
        .queries
        .iter()
        .map(|q| (q.deadline_us - q.arrival_us) as u128)
        .sum();
    (sum / trace.len() as u128) as Micros
}

/// Router settings for a trace and config (shared with the live runtime).
pub fn router_settings(trace: &Trace, config: &SimConfig, log_decisions: bool) -> RouterSettings {
    RouterSettings {
        workers: config.workers,
        actuation_delay_us: config.actuation_delay_us,
        dispatch_overhead_us: config.dispatch_overhead_us,
        divergence_backlog: RouterSettings::divergence_backlog_for(
            trace.mean_rate(),
            trace_slo_us(trace),
        ),
        samples: trace.duration_us.div_ceil(SAMPLE_INTERVAL_US) as usize,
        log_decisions,
    }
}

// Same-time ordering: faults, then arrivals, then completions.
const RANK_FAULT: u8 = 0;
const RANK_DONE: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Fault { worker: usize },
    BatchDone { batch: usize },
}

/// Runs the trace to completion and reports per-query outcomes.
pub fn run(trace: &Trace, config: &SimConfig) -> Result<SimReport> {
    run_inner(trace, config, false)
}

/// [`run`] that also keeps the decision log.
pub fn run_logged(trace: &Trace, config: &SimConfig) -> Result<SimReport> {
    run_inner(trace, config, true)
}

fn run_inner(trace: &Trace, config: &SimConfig, log_decisions: bool) -> Result<SimReport> {
    config.validate()?;
    let catalog = &config.catalog;
    let buckets = build_buckets(catalog, config.bucket_count)?;
    let policy = Policy::new(config.policy.clone(), catalog)?;
    let settings = router_settings(trace, config, log_decisions);
    let mut router = Router::new(catalog, &buckets, &policy, settings, trace.len());

    let mut heap: BinaryHeap<Reverse<(Micros, u8, u64, Event)>> = BinaryHeap::new();
    let mut seq = 0u64;
    for f in &config.faults {
        heap.push(Reverse((
            f.at_us,
            RANK_FAULT,
            seq,
            Event::Fault { worker: f.worker },
        )));
        seq += 1;
    }

    let queries = &trace.queries;
    let mut next = 0usize;
    let mut now = 0;
    loop {
        let next_arrival = queries.get(next).map(|q| q.arrival_us);
        let next_event = heap.peek().map(|Reverse((t, ..))| *t);
        now = match (next_arrival, next_event) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(e)) => e,
            (Some(a), Some(e)) => a.min(e),
        };
        router.advance_clock(now);

        while let Some(&Reverse((t, RANK_FAULT, _, Event::Fault { worker }))) = heap.peek() {
            if t != now {
                break;
            }
            heap.pop();
            router.kill(worker);
        }
        while next < queries.len() && queries[next].arrival_us == now {
            router.arrive(queries[next]);
            next += 1;
        }
        while let Some(&Reverse((t, _, _, ev))) = heap.peek() {
            if t != now {
                break;
            }
            heap.pop();
            match ev {
                Event::BatchDone { batch } => router.complete(batch, now),
                Event::Fault { worker } => router.kill(worker),
            }
        }

        for a in router.schedule(now) {
            heap.push(Reverse((
                a.start_us + a.duration_us,
                RANK_DONE,
                seq,
                Event::BatchDone {
                    batch: a.batch_index,
                },
            )));
            seq += 1;
        }
    }
    let end = now.max(trace.duration_us);
    Ok(router.finish(end, config.echo(trace)))
}
