//! Success metrics and report export.
//!
//! SLO attainment counts every query; mean serving accuracy averages only the
//! queries that met their deadline. A secondary effective accuracy counts
//! misses and drops as zero.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Micros;

/// Width of one dynamics sample.
pub const SAMPLE_INTERVAL_US: Micros = 100_000;

pub const DYNAMICS_CSV_HEADER: &str = "t_ms,ingest_qps,accuracy,batch,queue_depth,workers";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Hit,
    Miss,
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: u64,
    pub arrival_us: Micros,
    pub deadline_us: Micros,
    pub outcome: Outcome,
    /// Completion time for served queries, drop time for dropped ones.
    pub completion_us: Option<Micros>,
    /// Accuracy of the subnet that served the query.
    pub accuracy: Option<f64>,
}

impl QueryRecord {
    /// Outcome with every deadline pulled `tighten_us` earlier; a hit stays a
    /// hit only if it still completes in time.
    pub fn tightened(&self, tighten_us: Micros) -> QueryRecord {
        let deadline_us = self.deadline_us.saturating_sub(tighten_us);
        let outcome = match (self.outcome, self.completion_us) {
            (Outcome::Hit, Some(done)) if done <= deadline_us => Outcome::Hit,
            (Outcome::Dropped, _) => Outcome::Dropped,
            _ => Outcome::Miss,
        };
        QueryRecord {
            deadline_us,
            outcome,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub total: u64,
    pub hits: u64,
    pub misses: u64,
    pub drops: u64,
    /// `hits / total`; an empty run counts as fully attained.
    pub slo_attainment: f64,
    /// Mean accuracy over hits only; absent when nothing hit.
    pub mean_serving_accuracy: Option<f64>,
    /// Accuracy summed over hits, divided by all queries.
    pub effective_accuracy: f64,
}

pub fn aggregate(records: &[QueryRecord]) -> Aggregates {
    let mut hits = 0u64;
    let mut misses = 0u64;
    let mut drops = 0u64;
    let mut acc_sum = 0.0f64;
    for r in records {
        match r.outcome {
            Outcome::Hit => {
                hits += 1;
                acc_sum += r.accuracy.unwrap_or(0.0);
            }
            Outcome::Miss => misses += 1,
            Outcome::Dropped => drops += 1,
        }
    }
    let total = records.len() as u64;
    Aggregates {
        total,
        hits,
        misses,
        drops,
        slo_attainment: if total == 0 {
            1.0
        } else {
            hits as f64 / total as f64
        },
        mean_serving_accuracy: (hits > 0).then(|| acc_sum / hits as f64),
        effective_accuracy: if total == 0 {
            0.0
        } else {
            acc_sum / total as f64
        },
    }
}

/// One 100 ms slice of run dynamics. `accuracy` and `batch` average the
/// dispatches made in the slice (query-weighted accuracy).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSample {
    pub t_ms: u64,
    pub ingest_qps: f64,
    pub accuracy: Option<f64>,
    pub batch: Option<f64>,
    pub queue_depth: u64,
    pub workers: u64,
}

/// Per-batch execution record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub worker: usize,
    pub start_us: Micros,
    pub end_us: Micros,
    pub subnet: usize,
    pub count: usize,
    pub profiled_batch: u32,
    /// Whether the worker paid the actuation delay for this batch.
    pub switched: bool,
    pub arrival_us: Micros,
    pub deadline_us: Micros,
    pub members: Vec<u64>,
}

/// Scheduler invocation, logged with the state that triggered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub time_us: Micros,
    pub idle_workers: usize,
    pub queue_depth: usize,
    pub slack_us: i64,
    /// Worker that received the batch, `None` when the front query was
    /// dropped instead.
    pub worker: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub aggregates: Aggregates,
    pub diverged: bool,
    pub max_backlog: u64,
    pub batches: u64,
    /// False when a live run could not keep up with the trace clock.
    pub valid: bool,
    pub max_pacing_lag_us: Micros,
    pub p99_pacing_lag_us: Micros,
}

/// Result of one simulated or live run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: serde_json::Value,
    pub summary: Summary,
    pub outcomes: Vec<QueryRecord>,
    pub dynamics: Vec<DynamicsSample>,
    pub batches: Vec<BatchRecord>,
    pub decisions: Vec<DecisionEvent>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a serde_json::Value,
    summary: &'a Summary,
}

impl SimReport {
    pub fn aggregates(&self) -> &Aggregates {
        &self.summary.aggregates
    }

    /// `report.json`: aggregates plus the config echo.
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&ReportFile {
            config: &self.config,
            summary: &self.summary,
        })
        .expect("report serializes")
    }

    pub fn write_report(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.report_json().as_bytes())
    }

    pub fn outcomes_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.outcomes {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_outcomes(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.outcomes_jsonl().as_bytes())
    }

    pub fn dynamics_csv(&self) -> String {
        let mut out = String::from(DYNAMICS_CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.dynamics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.t_ms,
                s.ingest_qps,
                opt(s.accuracy),
                opt(s.batch),
                s.queue_depth,
                s.workers
            ));
        }
        out
    }
}

/// Writes the dynamics timeseries as CSV, one row per 100 ms sample.
pub fn export_dynamics(report: &SimReport, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), report.dynamics_csv().as_bytes())
}

/// Reads `outcomes.jsonl` back.
pub fn read_outcomes(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_outcomes_from(std::io::BufReader::new(file))
}

pub fn parse_outcomes(text: &str) -> Result<Vec<QueryRecord>> {
    parse_outcomes_from(text.as_bytes())
}

fn parse_outcomes_from<R: BufRead>(reader: R) -> Result<Vec<QueryRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
