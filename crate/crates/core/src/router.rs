//! Router state machine shared by the simulator and the live runtime.
//!
//! The router owns the EDF queue, the worker table and all bookkeeping. A
//! driver feeds it arrivals, batch completions and faults with timestamps,
//! and calls [`Router::schedule`] afterwards; the router invokes the policy
//! only while some alive worker is idle and the queue is non-empty.

use serde::{Deserialize, Serialize};

use crate::metrics::{
    aggregate, BatchRecord, DecisionEvent, DynamicsSample, Outcome, QueryRecord, SimReport,
    Summary, SAMPLE_INTERVAL_US,
};
use crate::policy::Policy;
use crate::profile::{BucketTable, Catalog};
use crate::queue::EdfQueue;
use crate::tracegen::Query;
use crate::{Micros, SignedMicros};

/// Backlog multiple of `rate * SLO` above which a run is declared diverged.
pub const DIVERGENCE_FACTOR: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub id: usize,
    pub busy_until_us: Micros,
    pub current_subnet: Option<usize>,
    pub alive: bool,
    busy: bool,
    /// Killed while busy: leaves after the in-flight batch.
    dying: bool,
}

impl WorkerState {
    fn new(id: usize) -> Self {
        WorkerState {
            id,
            busy_until_us: 0,
            current_subnet: None,
            alive: true,
            busy: false,
            dying: false,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.alive && !self.busy
    }
}

/// A batch handed to a worker.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub worker: usize,
    pub subnet: usize,
    pub start_us: Micros,
    /// Actuation delay (if any) plus profiled latency.
    pub duration_us: Micros,
    pub queries: Vec<Query>,
    /// Index into the router's batch log.
    pub batch_index: usize,
}

#[derive(Clone, Debug)]
pub struct RouterSettings {
    pub workers: usize,
    pub actuation_delay_us: Micros,
    pub dispatch_overhead_us: Micros,
    /// Backlog level that flags divergence.
    pub divergence_backlog: f64,
    /// Number of dynamics samples to keep.
    pub samples: usize,
    /// Keep the per-decision log (used to audit the invocation contract).
    pub log_decisions: bool,
}

impl RouterSettings {
    /// Divergence threshold for a trace with the given mean rate and SLO.
    pub fn divergence_backlog_for(mean_rate_qps: f64, slo_us: Micros) -> f64 {
        DIVERGENCE_FACTOR * mean_rate_qps * slo_us as f64 / 1e6
    }
}

#[derive(Default)]
struct SampleAcc {
    arrivals: u64,
    served: u64,
    acc_sum: f64,
    batch_sum: f64,
    dispatches: u64,
}

pub struct Router<'a> {
    catalog: &'a Catalog,
    buckets: &'a BucketTable,
    policy: &'a Policy,
    settings: RouterSettings,
    min_feasible_us: Micros,
    queue: EdfQueue,
    workers: Vec<WorkerState>,
    records: Vec<Option<QueryRecord>>,
    batches: Vec<BatchRecord>,
    decisions: Vec<DecisionEvent>,
    arrived: u64,
    dispatched: u64,
    max_backlog: u64,
    diverged: bool,
    samples: Vec<DynamicsSample>,
    current: Vec<SampleAcc>,
    next_sample: usize,
}

impl<'a> Router<'a> {
    pub fn new(
        catalog: &'a Catalog,
        buckets: &'a BucketTable,
        policy: &'a Policy,
        settings: RouterSettings,
        expected_queries: usize,
    ) -> Self {
        let workers = (0..settings.workers).map(WorkerState::new).collect();
        let min_feasible_us = policy.min_feasible_latency(catalog) + settings.dispatch_overhead_us;
        let n_samples = settings.samples;
        Router {
            catalog,
            buckets,
            policy,
            settings,
            min_feasible_us,
            queue: EdfQueue::new(),
            workers,
            records: vec![None; expected_queries],
            batches: Vec::new(),
            decisions: Vec::new(),
            arrived: 0,
            dispatched: 0,
            max_backlog: 0,
            diverged: false,
            samples: Vec::with_capacity(n_samples),
            current: (0..n_samples).map(|_| SampleAcc::default()).collect(),
            next_sample: 0,
        }
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn batch_worker(&self, batch_index: usize) -> usize {
        self.batches[batch_index].worker
    }

    pub fn alive_workers(&self) -> usize {
        self.workers.iter().filter(|w| w.alive).count()
    }

    fn slot(&self, t: Micros) -> Option<usize> {
        let k = (t / SAMPLE_INTERVAL_US) as usize;
        (k < self.current.len()).then_some(k)
    }

    /// Closes every dynamics sample that ends at or before `now`.
    pub fn advance_clock(&mut self, now: Micros) {
        while self.next_sample < self.current.len()
            && (self.next_sample as Micros + 1) * SAMPLE_INTERVAL_US <= now
        {
            self.close_sample();
        }
    }

    fn close_sample(&mut self) {
        let k = self.next_sample;
        let acc = &self.current[k];
        self.samples.push(DynamicsSample {
            t_ms: k as u64 * SAMPLE_INTERVAL_US / 1000,
            ingest_qps: acc.arrivals as f64 * 1e6 / SAMPLE_INTERVAL_US as f64,
            accuracy: (acc.served > 0).then(|| acc.acc_sum / acc.served as f64),
            batch: (acc.dispatches > 0).then(|| acc.batch_sum / acc.dispatches as f64),
            queue_depth: self.queue.len() as u64,
            workers: self.alive_workers() as u64,
        });
        self.next_sample += 1;
    }

    fn update_backlog(&mut self) {
        let backlog = self.arrived - self.dispatched;
        self.max_backlog = self.max_backlog.max(backlog);
        if backlog as f64 > self.settings.divergence_backlog {
            self.diverged = true;
        }
    }

    pub fn arrive(&mut self, q: Query) {
        if let Some(k) = self.slot(q.arrival_us) {
            self.current[k].arrivals += 1;
        }
        let idx = q.id as usize;
        if idx >= self.records.len() {
            self.records.resize(idx + 1, None);
        }
        self.queue.enqueue(q).expect("trace ids are unique");
        self.arrived += 1;
        self.update_backlog();
    }

    /// Records the outcome of a finished batch and frees its worker.
    pub fn complete(&mut self, batch_index: usize, now: Micros) {
        let (worker, subnet) = {
            let b = &mut self.batches[batch_index];
            b.end_us = now;
            (b.worker, b.subnet)
        };
        let accuracy = self.catalog.subnets()[subnet].accuracy;
        for &id in &self.batches[batch_index].members {
            let rec = self.records[id as usize]
                .as_mut()
                .expect("dispatched query has a record");
            rec.completion_us = Some(now);
            rec.accuracy = Some(accuracy);
            rec.outcome = if now <= rec.deadline_us {
                Outcome::Hit
            } else {
                Outcome::Miss
            };
        }
        let w = &mut self.workers[worker];
        w.busy = false;
        if w.dying {
            w.alive = false;
            w.dying = false;
        }
    }

    /// Kills a worker; an in-flight batch still completes.
    pub fn kill(&mut self, worker: usize) {
        if let Some(w) = self.workers.get_mut(worker) {
            if w.busy {
                w.dying = true;
            } else {
                w.alive = false;
            }
        }
    }

    fn record_drop(&mut self, q: Query, now: Micros) {
        self.records[q.id as usize] = Some(QueryRecord {
            id: q.id,
            arrival_us: q.arrival_us,
            deadline_us: q.deadline_us,
            outcome: Outcome::Dropped,
            completion_us: Some(now),
            accuracy: None,
        });
    }

    /// Runs the scheduler until no alive worker is idle or the queue is
    /// empty, returning the batches handed out.
    pub fn schedule(&mut self, now: Micros) -> Vec<Assignment> {
        let mut out = Vec::new();
        while let Some(worker) = self.workers.iter().position(WorkerState::is_idle) {
            for q in self.queue.drop_expired(now, self.min_feasible_us) {
                self.record_drop(q, now);
            }
            let Some(slack) = self.queue.peek_slack(now) else {
                break;
            };
            let effective = slack - self.settings.dispatch_overhead_us as SignedMicros;
            let depth = self.queue.len();
            let decision = self
                .policy
                .decide(effective, depth, self.buckets, self.catalog);
            if self.settings.log_decisions {
                self.decisions.push(DecisionEvent {
                    time_us: now,
                    idle_workers: self.workers.iter().filter(|w| w.is_idle()).count(),
                    queue_depth: depth,
                    slack_us: slack,
                    worker: decision.map(|_| worker),
                });
            }
            let Some(decision) = decision else {
                let q = self.queue.pop().expect("peeked");
                self.record_drop(q, now);
                continue;
            };
            let plan = decision.clamp_to_queue(depth, self.catalog);
            let batch = self.queue.take_batch(plan.count).expect("non-empty");
            let w = &mut self.workers[worker];
            let switched = w.current_subnet.is_some_and(|s| s != plan.subnet);
            let actuation = if switched {
                self.settings.actuation_delay_us
            } else {
                0
            };
            let duration = actuation + plan.latency_us;
            let start = now + self.settings.dispatch_overhead_us;
            w.busy = true;
            w.current_subnet = Some(plan.subnet);
            w.busy_until_us = start + duration;

            for q in &batch.queries {
                self.records[q.id as usize] = Some(QueryRecord {
                    id: q.id,
                    arrival_us: q.arrival_us,
                    deadline_us: q.deadline_us,
                    outcome: Outcome::Miss,
                    completion_us: None,
                    accuracy: None,
                });
            }
            if let Some(k) = self.slot(now) {
                let acc = &mut self.current[k];
                acc.served += batch.len() as u64;
                acc.acc_sum += self.catalog.subnets()[plan.subnet].accuracy * batch.len() as f64;
                acc.batch_sum += batch.len() as f64;
                acc.dispatches += 1;
            }
            self.dispatched += batch.len() as u64;
            let batch_index = self.batches.len();
            self.batches.push(BatchRecord {
                worker,
                start_us: start,
                end_us: start + duration,
                subnet: plan.subnet,
                count: batch.len(),
                profiled_batch: plan.profiled_batch,
                switched,
                arrival_us: batch.arrival_us,
                deadline_us: batch.deadline_us,
                members: batch.queries.iter().map(|q| q.id).collect(),
            });
            out.push(Assignment {
                worker,
                subnet: plan.subnet,
                start_us: start,
                duration_us: duration,
                queries: batch.queries,
                batch_index,
            });
        }
        self.update_backlog();
        out
    }

    /// Finalizes the run. Queries never dispatched count as dropped at
    /// `end_us`.
    pub fn finish(mut self, end_us: Micros, config: serde_json::Value) -> SimReport {
        while self.next_sample < self.current.len() {
            self.close_sample();
        }
        while let Some(q) = self.queue.pop() {
            self.record_drop(q, end_us);
        }
        let outcomes: Vec<QueryRecord> = self.records.into_iter().flatten().collect();
        let aggregates = aggregate(&outcomes);
        SimReport {
            config,
            summary: Summary {
                aggregates,
                diverged: self.diverged,
                max_backlog: self.max_backlog,
                batches: self.batches.len() as u64,
                valid: true,
                max_pacing_lag_us: 0,
                p99_pacing_lag_us: 0,
            },
            outcomes,
            dynamics: self.samples,
            batches: self.batches,
            decisions: self.decisions,
        }
    }
}
