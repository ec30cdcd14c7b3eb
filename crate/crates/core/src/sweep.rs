//! Experiment grids: cross-products of traces, policies, worker counts and
//! seeds, run in parallel and tabulated as CSV.
//!
//! ```toml
//! policies = ["slackfit", "minacc"]
//! seeds = [1, 2]
//! workers = 8
//!
//! [[traces]]
//! kind = "bursty"
//! duration_s = 30
//! base_rate = 1000
//! variant_rate = [2950, 4900, 5550]
//! cv2 = [2, 4, 8]
//! ```

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::live::serve;
use crate::policy::PolicyKind;
use crate::profile::{Catalog, DEFAULT_BUCKET_COUNT};
use crate::sim::{parse_faults, run, SimConfig};
use crate::tracegen::{generate, TraceShape, TraceSpec, DEFAULT_SLO_US};
use crate::Micros;

pub const SWEEP_CSV_HEADER: &str =
    "policy,kind,lambda,cv2,tau,seed,workers,slo_attainment,mean_accuracy,diverged";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    Simulate,
    Serve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceGrid {
    pub kind: String,
    pub duration_s: f64,
    #[serde(default)]
    pub slo_us: Option<Micros>,
    /// Shape parameters; list values expand into the cross-product.
    #[serde(flatten)]
    pub params: BTreeMap<String, OneOrMany<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub policies: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_workers")]
    pub workers: OneOrMany<usize>,
    #[serde(default)]
    pub actuation_delay_us: Micros,
    #[serde(default = "default_buckets")]
    pub bucket_count: usize,
    #[serde(default)]
    pub dispatch_overhead_us: Micros,
    #[serde(default)]
    pub faults: String,
    #[serde(default)]
    pub mode: SweepMode,
    /// Profile CSV path, resolved by the caller; the synthetic default
    /// profile otherwise.
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub traces: Vec<TraceGrid>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_workers() -> OneOrMany<usize> {
    OneOrMany::One(8)
}

fn default_buckets() -> usize {
    DEFAULT_BUCKET_COUNT
}

/// One fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub trace: TraceSpec,
    pub config: SimConfig,
    pub mode: SweepMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: String,
    pub kind: String,
    pub lambda: f64,
    pub cv2: f64,
    pub tau: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub slo_attainment: f64,
    pub mean_accuracy: Option<f64>,
    pub diverged: bool,
}

fn shape_params(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "bursty" => &["base_rate", "variant_rate", "cv2"],
        "time_varying" => &["start_rate", "end_rate", "acceleration", "cv2"],
        "spikes" => &["base_rate", "spike_rate", "spike_period_s", "cv2"],
        _ => return None,
    })
}

impl TraceGrid {
    /// Expands list-valued parameters into one trace spec per combination
    /// (without the seed).
    fn expand(&self) -> Result<Vec<TraceSpec>> {
        let names = shape_params(&self.kind)
            .ok_or_else(|| Error::Config(format!("unknown trace kind `{}`", self.kind)))?;
        if let Some(k) = self.params.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter `{k}` for {} traces",
                self.kind
            )));
        }
        let mut combos: Vec<BTreeMap<&str, f64>> = vec![BTreeMap::new()];
        for name in names {
            let values = match self.params.get(*name) {
                Some(v) => v.values(),
                None if *name == "cv2" => vec![1.0],
                None => {
                    return Err(Error::Config(format!(
                        "{} trace is missing `{name}`",
                        self.kind
                    )))
                }
            };
            if values.is_empty() {
                return Ok(Vec::new());
            }
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.insert(name, v);
                        c
                    })
                })
                .collect();
        }
        let slo = self.slo_us.unwrap_or(DEFAULT_SLO_US);
        Ok(combos
            .into_iter()
            .map(|c| {
                let shape = match self.kind.as_str() {
                    "bursty" => TraceShape::Bursty {
                        base_rate: c["base_rate"],
                        variant_rate: c["variant_rate"],
                        cv2: c["cv2"],
                    },
                    "time_varying" => TraceShape::TimeVarying {
                        start_rate: c["start_rate"],
                        end_rate: c["end_rate"],
                        acceleration: c["acceleration"],
                        cv2: c["cv2"],
                    },
                    _ => TraceShape::Spikes {
                        base_rate: c["base_rate"],
                        spike_rate: c["spike_rate"],
                        spike_period_s: c["spike_period_s"],
                        cv2: c["cv2"],
                    },
                };
                TraceSpec {
                    shape,
                    duration_s: self.duration_s,
                    slo_us: slo,
                    seed: 0,
                }
            })
            .collect())
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolves and validates every cell; any invalid cell fails the whole
    /// sweep before anything runs.
    pub fn cells(&self, catalog: &Catalog) -> Result<Vec<SweepCell>> {
        let policies = self
            .policies
            .iter()
            .map(|p| p.parse::<PolicyKind>())
            .collect::<Result<Vec<_>>>()?;
        let faults = parse_faults(&self.faults)?;
        let mut cells = Vec::new();
        for grid in &self.traces {
            for spec in grid.expand()? {
                for policy in &policies {
                    for workers in self.workers.values() {
                        for &seed in &self.seeds {
                            let trace = TraceSpec {
                                seed,
                                ..spec.clone()
                            };
                            trace.validate()?;
                            let config = SimConfig {
                                workers,
                                actuation_delay_us: self.actuation_delay_us,
                                policy: policy.clone(),
                                bucket_count: self.bucket_count,
                                dispatch_overhead_us: self.dispatch_overhead_us,
                                faults: faults.clone(),
                                catalog: catalog.clone(),
                            };
                            config.validate()?;
                            cells.push(SweepCell {
                                trace,
                                config,
                                mode: self.mode,
                            });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

fn run_cell(cell: &SweepCell) -> Result<SweepRow> {
    let trace = generate(&cell.trace)?;
    let report = match cell.mode {
        SweepMode::Simulate => run(&trace, &cell.config)?,
        SweepMode::Serve => serve(&trace, &cell.config)?,
    };
    let (kind, cv2, tau) = match cell.trace.shape {
        TraceShape::Bursty { cv2, .. } => ("bursty", cv2, None),
        TraceShape::TimeVarying {
            acceleration, cv2, ..
        } => ("time_varying", cv2, Some(acceleration)),
        TraceShape::Spikes { cv2, .. } => ("spikes", cv2, None),
    };
    let agg = report.aggregates();
    Ok(SweepRow {
        policy: cell.config.policy.to_string(),
        kind: kind.to_string(),
        lambda: cell.trace.mean_rate(),
        cv2,
        tau,
        seed: cell.trace.seed,
        workers: cell.config.workers,
        slo_attainment: agg.slo_attainment,
        mean_accuracy: agg.mean_serving_accuracy,
        diverged: report.summary.diverged,
    })
}

/// Runs every cell. Simulated cells run in parallel; live cells run one at
/// a time so they do not compete for the wall clock.
pub fn run_sweep(spec: &SweepSpec, catalog: &Catalog) -> Result<Vec<SweepRow>> {
    let cells = spec.cells(catalog)?;
    match spec.mode {
        SweepMode::Simulate => cells.par_iter().map(run_cell).collect(),
        SweepMode::Serve => cells.iter().map(run_cell).collect(),
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.policy,
            r.kind,
            r.lambda,
            r.cv2,
            opt(r.tau),
            r.seed,
            r.workers,
            r.slo_attainment,
            opt(r.mean_accuracy),
            r.diverged
        ));
    }
    out
}
