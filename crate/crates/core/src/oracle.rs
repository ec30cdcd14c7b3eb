//! Exact offline scheduling on tiny slotted instances, the per-batch utility,
//! and the pareto-utility property check.
//!
//! Times are whole slots. A batch of `k` queries runs at the latency of the
//! smallest allowed batch size `>= k`; it occupies its worker over
//! `[start, start + latency)` and must finish by its earliest member
//! deadline.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::profile::{pareto_filter, Catalog, SubnetId, SubnetRecord};
use crate::sim::{run, SimConfig};
use crate::tracegen::Trace;
use crate::Micros;

pub const MAX_QUERIES: usize = 8;
pub const MAX_WORKERS: usize = 2;
pub const MAX_SUBNETS: usize = 3;
pub const MAX_SLOTS: u32 = 12;
pub const ALLOWED_BATCH_SIZES: [u32; 3] = [1, 2, 4];

const OBJ_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotQuery {
    pub arrival: u32,
    pub deadline: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSubnet {
    pub id: String,
    pub accuracy: f64,
    /// Latency in slots, one entry per instance batch size.
    pub latency: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlpInstance {
    /// Slot width used when the instance is replayed through the simulator.
    #[serde(default = "default_slot_us")]
    pub slot_us: Micros,
    pub slots: u32,
    pub workers: usize,
    pub batch_sizes: Vec<u32>,
    pub queries: Vec<SlotQuery>,
    pub subnets: Vec<SlotSubnet>,
}

fn default_slot_us() -> Micros {
    1_000
}

impl IlpInstance {
    pub fn parse(text: &str) -> Result<Self> {
        let inst: IlpInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let too_large = |m: String| Err(Error::InstanceTooLarge(m));
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.queries.len() > MAX_QUERIES {
            return too_large(format!(
                "{} queries, at most {MAX_QUERIES}",
                self.queries.len()
            ));
        }
        if self.workers > MAX_WORKERS {
            return too_large(format!("{} workers, at most {MAX_WORKERS}", self.workers));
        }
        if self.subnets.len() > MAX_SUBNETS {
            return too_large(format!(
                "{} subnets, at most {MAX_SUBNETS}",
                self.subnets.len()
            ));
        }
        if self.slots > MAX_SLOTS {
            return too_large(format!("{} slots, at most {MAX_SLOTS}", self.slots));
        }
        if self.workers == 0 || self.subnets.is_empty() || self.slot_us == 0 {
            return bad("instance needs a worker, a subnet and a positive slot width");
        }
        if self.batch_sizes.is_empty()
            || self.batch_sizes.windows(2).any(|w| w[0] >= w[1])
            || self
                .batch_sizes
                .iter()
                .any(|b| !ALLOWED_BATCH_SIZES.contains(b))
        {
            return bad("batch sizes must be an ascending subset of {1, 2, 4}");
        }
        for s in &self.subnets {
            if s.latency.len() != self.batch_sizes.len() {
                return bad("every subnet needs one latency per batch size");
            }
            if s.latency.contains(&0) || s.latency.windows(2).any(|w| w[0] >= w[1]) {
                return bad("latencies must be positive and increase with batch size");
            }
            if !(s.accuracy.is_finite() && (0.0..=100.0).contains(&s.accuracy)) {
                return bad("accuracy must lie in [0, 100]");
            }
        }
        let mut ids: Vec<&str> = self.subnets.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate subnet id");
        }
        if self
            .queries
            .iter()
            .any(|q| q.deadline > self.slots || q.arrival > q.deadline)
        {
            return bad("queries need arrival <= deadline <= slots");
        }
        Ok(())
    }

    pub fn max_batch(&self) -> usize {
        *self.batch_sizes.last().expect("validated") as usize
    }

    /// Latency in slots of `count` queries on `subnet`.
    pub fn latency(&self, subnet: usize, count: usize) -> Option<u32> {
        let idx = self.batch_sizes.iter().position(|&b| b as usize >= count)?;
        Some(self.subnets[subnet].latency[idx])
    }

    /// Builds an instance from microsecond data, rounding latencies up and
    /// deadlines down to whole slots so no infeasible batch becomes
    /// feasible.
    pub fn from_micros(
        slot_us: Micros,
        workers: usize,
        catalog: &Catalog,
        queries: &[(Micros, Micros)],
    ) -> Result<Self> {
        let horizon = queries.iter().map(|&(_, d)| d / slot_us).max().unwrap_or(0);
        let inst = IlpInstance {
            slot_us,
            slots: horizon as u32,
            workers,
            batch_sizes: catalog.batch_sizes().to_vec(),
            queries: queries
                .iter()
                .map(|&(a, d)| SlotQuery {
                    arrival: a.div_ceil(slot_us) as u32,
                    deadline: (d / slot_us) as u32,
                })
                .collect(),
            subnets: catalog
                .subnets()
                .iter()
                .map(|s| SlotSubnet {
                    id: s.id.to_string(),
                    accuracy: s.accuracy,
                    latency: s
                        .profile()
                        .iter()
                        .map(|&(_, l)| l.div_ceil(slot_us) as u32)
                        .collect(),
                })
                .collect(),
        };
        inst.validate()?;
        Ok(inst)
    }

    /// The instance as a trace and catalog in microseconds.
    pub fn to_trace_and_catalog(&self) -> Result<(Trace, Catalog)> {
        let s = self.slot_us;
        let trace = Trace::from_times(
            self.queries
                .iter()
                .map(|q| (q.arrival as Micros * s, q.deadline as Micros * s))
                .filter(|&(a, d)| d > a)
                .collect(),
            self.slots as Micros * s,
        )?;
        let subnets = self
            .subnets
            .iter()
            .map(|sn| {
                SubnetRecord::new(
                    SubnetId::new(sn.id.clone()),
                    sn.accuracy,
                    self.batch_sizes
                        .iter()
                        .zip(&sn.latency)
                        .map(|(&b, &l)| (b, l as Micros * s))
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((trace, Catalog::new(subnets)?))
    }
}

/// One batch of an offline schedule. `members` index the instance queries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledBatch {
    pub members: Vec<usize>,
    pub start: u32,
    pub worker: usize,
    pub subnet: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub batches: Vec<ScheduledBatch>,
    pub objective: f64,
}

/// Sum of `Acc * |B|` over the batches, recomputed from the schedule.
pub fn objective(inst: &IlpInstance, batches: &[ScheduledBatch]) -> f64 {
    batches
        .iter()
        .map(|b| inst.subnets.get(b.subnet).map_or(0.0, |s| s.accuracy) * b.members.len() as f64)
        .sum()
}

/// Verifies every offline constraint; returns the first violation.
pub fn check_schedule(inst: &IlpInstance, schedule: &Schedule) -> std::result::Result<(), String> {
    let mut used = vec![false; inst.queries.len()];
    let mut busy: Vec<Vec<(u32, u32)>> = vec![Vec::new(); inst.workers];
    for (i, b) in schedule.batches.iter().enumerate() {
        if b.members.is_empty() {
            return Err(format!("batch {i} is empty"));
        }
        if b.members.len() > inst.max_batch() {
            return Err(format!("batch {i} exceeds the largest batch size"));
        }
        if b.subnet >= inst.subnets.len() {
            return Err(format!("batch {i} names an unknown subnet"));
        }
        if b.worker >= inst.workers {
            return Err(format!("batch {i} names an unknown worker"));
        }
        for &q in &b.members {
            if q >= inst.queries.len() {
                return Err(format!("batch {i} names an unknown query"));
            }
            if used[q] {
                return Err(format!("query {q} is in more than one batch"));
            }
            used[q] = true;
        }
        let arrival = b
            .members
            .iter()
            .map(|&q| inst.queries[q].arrival)
            .max()
            .unwrap();
        let deadline = b
            .members
            .iter()
            .map(|&q| inst.queries[q].deadline)
            .min()
            .unwrap();
        if b.start < arrival {
            return Err(format!("batch {i} starts before a member arrives"));
        }
        let lat = inst.latency(b.subnet, b.members.len()).unwrap();
        if b.start + lat > deadline {
            return Err(format!("batch {i} ends after its deadline"));
        }
        busy[b.worker].push((b.start, b.start + lat));
    }
    for (w, iv) in busy.iter_mut().enumerate() {
        iv.sort_unstable();
        if iv.windows(2).any(|p| p[0].1 > p[1].0) {
            return Err(format!("worker {w} runs two batches at once"));
        }
    }
    let recomputed = objective(inst, &schedule.batches);
    if (recomputed - schedule.objective).abs() > 1e-6 {
        return Err(format!(
            "objective {} does not match batches ({recomputed})",
            schedule.objective
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct Choice {
    subset: u16,
    free_idx: usize,
    subnet: usize,
}

struct Solver<'a> {
    inst: &'a IlpInstance,
    arrival: Vec<u32>,
    deadline: Vec<u32>,
    memo: HashMap<(u16, Vec<u32>), (f64, Option<Choice>)>,
}

impl Solver<'_> {
    fn best(&mut self, mask: u16, free: &[u32]) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(&(v, _)) = self.memo.get(&(mask, free.to_vec())) {
            return v;
        }
        let inst = self.inst;
        let mut best = 0.0;
        let mut choice = None;
        let mut sub = mask;
        while sub != 0 {
            let k = sub.count_ones() as usize;
            if k <= inst.max_batch() {
                let a = self.arrival[sub as usize];
                let d = self.deadline[sub as usize];
                for fi in 0..free.len() {
                    if fi > 0 && free[fi] == free[fi - 1] {
                        continue;
                    }
                    let start = free[fi].max(a);
                    for (si, s) in inst.subnets.iter().enumerate() {
                        let lat = inst.latency(si, k).expect("k within max batch");
                        if start + lat > d {
                            continue;
                        }
                        let mut next = free.to_vec();
                        next[fi] = start + lat;
                        next.sort_unstable();
                        let v = s.accuracy * k as f64 + self.best(mask & !sub, &next);
                        if v > best + OBJ_EPS {
                            best = v;
                            choice = Some(Choice {
                                subset: sub,
                                free_idx: fi,
                                subnet: si,
                            });
                        }
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        self.memo.insert((mask, free.to_vec()), (best, choice));
        best
    }
}

/// Maximizes the summed accuracy of on-time queries exactly.
///
/// Searches over which subset runs next on which worker with which subnet,
/// each batch starting as early as its worker and members allow. Starting
/// earlier never breaks a deadline, so every feasible schedule has a
/// left-shifted counterpart of equal value in this space.
pub fn solve_exact(inst: &IlpInstance) -> Result<Schedule> {
    inst.validate()?;
    let n = inst.queries.len();
    let full = ((1u32 << n) - 1) as u16;
    let mut arrival = vec![0u32; 1 << n];
    let mut deadline = vec![u32::MAX; 1 << n];
    for sub in 1..(1usize << n) {
        for (i, q) in inst.queries.iter().enumerate() {
            if sub & (1 << i) != 0 {
                arrival[sub] = arrival[sub].max(q.arrival);
                deadline[sub] = deadline[sub].min(q.deadline);
            }
        }
    }
    let mut solver = Solver {
        inst,
        arrival,
        deadline,
        memo: HashMap::new(),
    };
    let mut free = vec![0u32; inst.workers];
    let value = solver.best(full, &free);

    // Replay the memoized choices, mapping sorted free times back to
    // concrete workers (lowest id among equals).
    let mut worker_free = vec![0u32; inst.workers];
    let mut mask = full;
    let mut batches = Vec::new();
    while let Some(&(_, Some(c))) = solver.memo.get(&(mask, free.clone())) {
        let t = free[c.free_idx];
        let worker = worker_free.iter().position(|&f| f == t).expect("tracked");
        let members: Vec<usize> = (0..n).filter(|&i| c.subset & (1 << i) != 0).collect();
        let start = t.max(solver.arrival[c.subset as usize]);
        let end = start + inst.latency(c.subnet, members.len()).unwrap();
        batches.push(ScheduledBatch {
            members,
            start,
            worker,
            subnet: c.subnet,
        });
        worker_free[worker] = end;
        free[c.free_idx] = end;
        free.sort_unstable();
        mask &= !c.subset;
    }
    batches.sort_by_key(|b| (b.start, b.worker));
    let objective = objective(inst, &batches);
    debug_assert!((objective - value).abs() < 1e-6);
    Ok(Schedule { batches, objective })
}

/// Literal enumeration: every partition of every subset into batches and
/// every `(start, worker, subnet)` per batch, filtered by [`check_schedule`].
/// Exponential; meant as an independent check of [`solve_exact`] on the
/// smallest instances.
pub fn solve_enumerate(inst: &IlpInstance) -> Result<Schedule> {
    fn assign(inst: &IlpInstance, i: usize, groups: &mut Vec<Vec<usize>>, best: &mut Schedule) {
        if i == inst.queries.len() {
            place(inst, groups, 0, &mut Vec::new(), best);
            return;
        }
        assign(inst, i + 1, groups, best);
        for g in 0..groups.len() {
            if groups[g].len() < inst.max_batch() {
                groups[g].push(i);
                assign(inst, i + 1, groups, best);
                groups[g].pop();
            }
        }
        groups.push(vec![i]);
        assign(inst, i + 1, groups, best);
        groups.pop();
    }
    fn place(
        inst: &IlpInstance,
        groups: &[Vec<usize>],
        g: usize,
        placed: &mut Vec<ScheduledBatch>,
        best: &mut Schedule,
    ) {
        if g == groups.len() {
            let s = Schedule {
                batches: placed.clone(),
                objective: objective(inst, placed),
            };
            if s.objective > best.objective && check_schedule(inst, &s).is_ok() {
                *best = s;
            }
            return;
        }
        for start in 0..=inst.slots {
            for worker in 0..inst.workers {
                for subnet in 0..inst.subnets.len() {
                    placed.push(ScheduledBatch {
                        members: groups[g].clone(),
                        start,
                        worker,
                        subnet,
                    });
                    place(inst, groups, g + 1, placed, best);
                    placed.pop();
                }
            }
        }
    }
    inst.validate()?;
    let mut best = Schedule {
        batches: Vec::new(),
        objective: 0.0,
    };
    assign(inst, 0, &mut Vec::new(), &mut best);
    Ok(best)
}

/// Value of serving `batch` queries on `subnet` starting at `start_us`
/// against batch deadline `deadline_us`: `Acc * |B|` if the run ends strictly
/// before the deadline, else zero. `None` if the batch size is unprofiled.
pub fn utility(
    subnet: &SubnetRecord,
    batch: u32,
    deadline_us: Micros,
    start_us: Micros,
) -> Option<f64> {
    let l = subnet.latency(batch)?;
    Some(if start_us + l < deadline_us {
        subnet.accuracy * batch as f64
    } else {
        0.0
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Counterexample {
    pub pareto: SubnetId,
    pub other: SubnetId,
    pub batch: u32,
    pub deadline_us: Micros,
    pub pareto_utility: f64,
    pub other_utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub trials: usize,
    /// Pairs that met the comparison preconditions.
    pub compared: usize,
    /// Close pairs whose latencies fall on opposite sides of the deadline.
    pub skipped_ambiguous: usize,
    pub violations: Vec<Lemma1Counterexample>,
}

impl Lemma1Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `(B, d_B)` and compares every pareto subnet with every less
/// accurate non-pareto subnet within `epsilon_us` latency at `B`.
///
/// The pareto subnet must have utility `>=` the other, strictly when both
/// meet the deadline. A pair whose latencies straddle the deadline is not
/// "similar" at that deadline and is counted as skipped.
pub fn check_lemma1(
    catalog: &Catalog,
    trials: usize,
    epsilon_us: Micros,
    seed: u64,
) -> Lemma1Report {
    let front = pareto_filter(catalog);
    let on_front = |s: &SubnetRecord| front.index_of(&s.id).is_some();
    let pareto: Vec<&SubnetRecord> = catalog.subnets().iter().filter(|s| on_front(s)).collect();
    let others: Vec<&SubnetRecord> = catalog.subnets().iter().filter(|s| !on_front(s)).collect();
    let max_lat = catalog.max_latency().unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Lemma1Report {
        trials,
        compared: 0,
        skipped_ambiguous: 0,
        violations: Vec::new(),
    };
    if catalog.is_empty() {
        return report;
    }
    for _ in 0..trials {
        let batch = *catalog.batch_sizes().choose(&mut rng).expect("non-empty");
        let deadline = rng.gen_range(0..=2 * max_lat);
        for p in &pareto {
            for q in &others {
                let lp = p.latency(batch).expect("shared grid");
                let lq = q.latency(batch).expect("shared grid");
                if p.accuracy <= q.accuracy || lp.abs_diff(lq) > epsilon_us {
                    continue;
                }
                if (lp < deadline) != (lq < deadline) {
                    report.skipped_ambiguous += 1;
                    continue;
                }
                report.compared += 1;
                let up = utility(p, batch, deadline, 0).expect("shared grid");
                let uq = utility(q, batch, deadline, 0).expect("shared grid");
                let both_feasible = lp < deadline && lq < deadline;
                let ok = if both_feasible { up > uq } else { up >= uq };
                if !ok {
                    report.violations.push(Lemma1Counterexample {
                        pareto: p.id.clone(),
                        other: q.id.clone(),
                        batch,
                        deadline_us: deadline,
                        pareto_utility: up,
                        other_utility: uq,
                    });
                }
            }
        }
    }
    report
}

/// Random catalog with independent accuracy and latency draws, so it mixes
/// pareto and dominated subnets.
pub fn random_mixed_catalog(seed: u64, subnets: usize) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = [1u32, 2, 4, 8, 16, 32, 64];
    let records = (0..subnets)
        .map(|i| {
            let base = rng.gen_range(1_000..10_000u64);
            let per_item = rng.gen_range(50..400u64);
            let latency = grid
                .iter()
                .map(|&b| (b, base + per_item * b as u64))
                .collect();
            let acc = (rng.gen_range(70.0..81.0f64) * 100.0).round() / 100.0;
            SubnetRecord::new(SubnetId::new(format!("r{i}")), acc, latency).expect("monotone")
        })
        .collect();
    Catalog::new(records).expect("unique ids")
}

/// Random tiny instance whose subnets get strictly slower with accuracy at
/// every batch size.
pub fn random_instance(seed: u64) -> IlpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = rng.gen_range(6..=MAX_SLOTS);
    let workers = rng.gen_range(1..=MAX_WORKERS);
    let n_subnets = rng.gen_range(1..=MAX_SUBNETS);
    let batch_sizes = ALLOWED_BATCH_SIZES.to_vec();
    let mut prev = vec![0u32; batch_sizes.len()];
    let mut subnets = Vec::new();
    for s in 0..n_subnets {
        let mut lat = Vec::new();
        let mut floor = 0;
        for p in &prev {
            let l = (p + rng.gen_range(1..=2)).max(floor + 1);
            lat.push(l);
            floor = l;
        }
        prev = lat.clone();
        subnets.push(SlotSubnet {
            id: format!("s{s}"),
            accuracy: 0.70 + 0.05 * s as f64 + rng.gen_range(0.0..0.04),
            latency: lat,
        });
    }
    let n_queries = rng.gen_range(1..=MAX_QUERIES);
    let queries = (0..n_queries)
        .map(|_| {
            let arrival = rng.gen_range(0..slots - 2);
            let deadline = rng.gen_range(arrival + 1..=slots);
            SlotQuery { arrival, deadline }
        })
        .collect();
    IlpInstance {
        slot_us: 1_000,
        slots,
        workers,
        batch_sizes,
        queries,
        subnets,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyVsOracle {
    pub policy: String,
    pub policy_objective: f64,
    pub oracle_objective: f64,
    /// On-time batches of the policy run, as an offline schedule.
    pub policy_schedule: Schedule,
    pub oracle_schedule: Schedule,
}

/// Replays the instance through the simulator under `kind` and compares
/// the accuracy it realizes on time with the exact optimum.
pub fn policy_vs_oracle(inst: &IlpInstance, kind: &PolicyKind) -> Result<PolicyVsOracle> {
    inst.validate()?;
    let oracle = solve_exact(inst)?;
    let (trace, catalog) = inst.to_trace_and_catalog()?;
    let cfg = SimConfig::new(catalog.clone(), kind.clone(), inst.workers);
    let report = run(&trace, &cfg)?;

    // Trace ids follow arrival order; map them back to instance indices.
    let mut order: Vec<usize> = (0..inst.queries.len())
        .filter(|&i| inst.queries[i].deadline > inst.queries[i].arrival)
        .collect();
    order.sort_by_key(|&i| inst.queries[i].arrival);
    let slot = inst.slot_us;
    let mut batches = Vec::new();
    for b in &report.batches {
        if b.end_us > b.deadline_us {
            continue;
        }
        let id = &catalog.subnets()[b.subnet].id;
        let subnet = inst
            .subnets
            .iter()
            .position(|s| s.id == id.as_str())
            .expect("same subnets");
        batches.push(ScheduledBatch {
            members: b.members.iter().map(|&m| order[m as usize]).collect(),
            start: (b.start_us / slot) as u32,
            worker: b.worker,
            subnet,
        });
    }
    let policy_objective = objective(inst, &batches);
    Ok(PolicyVsOracle {
        policy: kind.to_string(),
        policy_objective,
        oracle_objective: oracle.objective,
        policy_schedule: Schedule {
            batches,
            objective: policy_objective,
        },
        oracle_schedule: oracle,
    })
}
