//! Seeded arrival traces.
//!
//! Three shapes are supported:
//!
//! * `bursty`: a deterministic stream at `base_rate` merged with a gamma
//!   renewal stream at `variant_rate` whose inter-arrival CV² is `cv2`
//!   (gamma shape `1/cv2`).
//! * `time_varying`: a single gamma stream whose mean rate ramps linearly
//!   from `start_rate` to `end_rate` at `acceleration` queries/s².
//! * `spikes`: a deterministic base stream plus one-second gamma bursts every
//!   `spike_period_s` seconds that lift the total rate to `spike_rate`.
//!
//! All timestamps are integer microseconds and generation is a pure function
//! of the spec, including its seed.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Micros;

/// Default per-query latency objective.
pub const DEFAULT_SLO_US: Micros = 36_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceShape {
    Bursty {
        base_rate: f64,
        variant_rate: f64,
        cv2: f64,
    },
    TimeVarying {
        start_rate: f64,
        end_rate: f64,
        /// Queries/s²; `inf` switches to `end_rate` at time zero.
        acceleration: f64,
        cv2: f64,
    },
    Spikes {
        base_rate: f64,
        spike_rate: f64,
        spike_period_s: f64,
        cv2: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    #[serde(flatten)]
    pub shape: TraceShape,
    pub duration_s: f64,
    pub slo_us: Micros,
    pub seed: u64,
}

impl TraceSpec {
    pub fn bursty(base_rate: f64, variant_rate: f64, cv2: f64, duration_s: f64, seed: u64) -> Self {
        TraceSpec {
            shape: TraceShape::Bursty {
                base_rate,
                variant_rate,
                cv2,
            },
            duration_s,
            slo_us: DEFAULT_SLO_US,
            seed,
        }
    }

    pub fn time_varying(
        start_rate: f64,
        end_rate: f64,
        acceleration: f64,
        cv2: f64,
        duration_s: f64,
        seed: u64,
    ) -> Self {
        TraceSpec {
            shape: TraceShape::TimeVarying {
                start_rate,
                end_rate,
                acceleration,
                cv2,
            },
            duration_s,
            slo_us: DEFAULT_SLO_US,
            seed,
        }
    }

    pub fn spikes(
        base_rate: f64,
        spike_rate: f64,
        spike_period_s: f64,
        cv2: f64,
        duration_s: f64,
        seed: u64,
    ) -> Self {
        TraceSpec {
            shape: TraceShape::Spikes {
                base_rate,
                spike_rate,
                spike_period_s,
                cv2,
            },
            duration_s,
            slo_us: DEFAULT_SLO_US,
            seed,
        }
    }

    pub fn with_slo_us(mut self, slo_us: Micros) -> Self {
        self.slo_us = slo_us;
        self
    }

    pub fn duration_us(&self) -> Micros {
        (self.duration_s * 1e6).round() as Micros
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::TraceSpec(m.to_string()));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration must be positive");
        }
        if self.duration_s > 1e7 {
            return bad("duration too long");
        }
        if self.slo_us == 0 {
            return bad("slo must be positive");
        }
        let rate_ok = |r: f64| r.is_finite() && (0.0..=1e7).contains(&r);
        let cv2_ok = |c: f64| c.is_finite() && (0.0..=1e4).contains(&c);
        match self.shape {
            TraceShape::Bursty {
                base_rate,
                variant_rate,
                cv2,
            } => {
                if !rate_ok(base_rate) || !rate_ok(variant_rate) {
                    return bad("rates must be finite and non-negative");
                }
                if !cv2_ok(cv2) {
                    return bad("cv2 must be non-negative");
                }
            }
            TraceShape::TimeVarying {
                start_rate,
                end_rate,
                acceleration,
                cv2,
            } => {
                if !rate_ok(start_rate) || !rate_ok(end_rate) {
                    return bad("rates must be finite and non-negative");
                }
                if start_rate <= 0.0 {
                    return bad("time-varying start rate must be positive");
                }
                if end_rate < start_rate {
                    return bad("end rate must not be below start rate");
                }
                if acceleration.is_nan() || acceleration <= 0.0 {
                    return bad("acceleration must be positive");
                }
                if !cv2_ok(cv2) {
                    return bad("cv2 must be non-negative");
                }
            }
            TraceShape::Spikes {
                base_rate,
                spike_rate,
                spike_period_s,
                cv2,
            } => {
                if !rate_ok(base_rate) || !rate_ok(spike_rate) {
                    return bad("rates must be finite and non-negative");
                }
                if spike_rate < base_rate {
                    return bad("spike rate must not be below base rate");
                }
                if !(spike_period_s.is_finite() && spike_period_s >= 1.0) {
                    return bad("spike period must be at least one second");
                }
                if !cv2_ok(cv2) {
                    return bad("cv2 must be non-negative");
                }
            }
        }
        Ok(())
    }

    /// Expected number of queries, the integral of the rate over the trace.
    pub fn expected_count(&self) -> f64 {
        let d = self.duration_s;
        match self.shape {
            TraceShape::Bursty {
                base_rate,
                variant_rate,
                ..
            } => (base_rate + variant_rate) * d,
            TraceShape::TimeVarying {
                start_rate,
                end_rate,
                acceleration,
                ..
            } => {
                let ramp = if acceleration.is_infinite() {
                    0.0
                } else {
                    ((end_rate - start_rate) / acceleration).min(d)
                };
                let rate_at_ramp_end = start_rate + acceleration.min(f64::MAX) * ramp;
                let ramp_area = if ramp > 0.0 {
                    0.5 * (start_rate + rate_at_ramp_end) * ramp
                } else {
                    0.0
                };
                ramp_area + end_rate * (d - ramp)
            }
            TraceShape::Spikes {
                base_rate,
                spike_rate,
                spike_period_s,
                ..
            } => {
                base_rate * d
                    + (spike_rate - base_rate) * spike_starts(spike_period_s, d).len() as f64
            }
        }
    }

    /// Long-run mean arrival rate in queries/s.
    pub fn mean_rate(&self) -> f64 {
        self.expected_count() / self.duration_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub arrival_us: Micros,
    pub deadline_us: Micros,
}

impl Query {
    pub fn new(id: u64, arrival_us: Micros, deadline_us: Micros) -> Self {
        Query {
            id,
            arrival_us,
            deadline_us,
        }
    }
}

/// Time-ordered queries with dense ids `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub spec: Option<TraceSpec>,
    pub duration_us: Micros,
    pub queries: Vec<Query>,
}

impl Trace {
    /// Builds a trace from `(arrival, deadline)` pairs, sorting by arrival
    /// (stable) and assigning dense ids.
    pub fn from_times(mut times: Vec<(Micros, Micros)>, duration_us: Micros) -> Result<Self> {
        if times.iter().any(|&(a, d)| d <= a) {
            return Err(Error::TraceSpec("deadline must follow arrival".into()));
        }
        times.sort_by_key(|&(a, _)| a);
        let queries = times
            .into_iter()
            .enumerate()
            .map(|(i, (a, d))| Query::new(i as u64, a, d))
            .collect();
        Ok(Trace {
            spec: None,
            duration_us,
            queries,
        })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Mean arrival rate over the trace duration, queries/s.
    pub fn mean_rate(&self) -> f64 {
        if self.duration_us == 0 {
            return 0.0;
        }
        self.queries.len() as f64 * 1e6 / self.duration_us as f64
    }

    /// Interleaves two traces by arrival time; ids are reassigned densely.
    /// Useful for mixed-SLO workloads.
    pub fn merge(&self, other: &Trace) -> Trace {
        let mut times: Vec<(Micros, Micros)> = self
            .queries
            .iter()
            .chain(&other.queries)
            .map(|q| (q.arrival_us, q.deadline_us))
            .collect();
        times.sort_by_key(|&(a, _)| a);
        Trace::from_times(times, self.duration_us.max(other.duration_us))
            .expect("inputs already valid")
    }

    /// Writes JSON-lines: a header with the generating spec, then one query
    /// per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = TraceHeader {
            spec: self.spec.clone(),
            duration_us: self.duration_us,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for q in &self.queries {
            serde_json::to_writer(&mut w, q)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    /// Parses JSON-lines trace text. The header line is optional; without it
    /// the duration is taken from the last arrival.
    pub fn parse_jsonl(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }

    fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<TraceHeader> = None;
        let mut queries: Vec<Query> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 && line.contains("\"duration_us\"") {
                header = Some(serde_json::from_str(line).map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?);
                continue;
            }
            let q: Query = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if q.deadline_us <= q.arrival_us {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("query {} deadline does not follow arrival", q.id),
                });
            }
            if q.id != queries.len() as u64 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected query id {}, found {}", queries.len(), q.id),
                });
            }
            if let Some(prev) = queries.last() {
                if q.arrival_us < prev.arrival_us {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "arrivals must be non-decreasing".into(),
                    });
                }
            }
            queries.push(q);
        }
        let last = queries.last().map_or(0, |q| q.arrival_us + 1);
        let (spec, duration_us) = match header {
            Some(h) => (h.spec, h.duration_us.max(last)),
            None => (None, last),
        };
        Ok(Trace {
            spec,
            duration_us,
            queries,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    spec: Option<TraceSpec>,
    duration_us: Micros,
}

/// Generates the trace a spec describes.
pub fn generate(spec: &TraceSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let end = spec.duration_s;
    let mut arrivals: Vec<f64> = match spec.shape {
        TraceShape::Bursty {
            base_rate,
            variant_rate,
            cv2,
        } => {
            let mut a = deterministic_stream(base_rate, 0.0, end);
            a.extend(renewal_stream(&mut rng, variant_rate, cv2, 0.0, end));
            a
        }
        TraceShape::TimeVarying {
            start_rate,
            end_rate,
            acceleration,
            cv2,
        } => ramp_stream(&mut rng, start_rate, end_rate, acceleration, cv2, end),
        TraceShape::Spikes {
            base_rate,
            spike_rate,
            spike_period_s,
            cv2,
        } => {
            let mut a = deterministic_stream(base_rate, 0.0, end);
            for start in spike_starts(spike_period_s, end) {
                a.extend(renewal_stream(
                    &mut rng,
                    spike_rate - base_rate,
                    cv2,
                    start,
                    start + 1.0,
                ));
            }
            a
        }
    };
    arrivals.sort_by(f64::total_cmp);
    let slo = spec.slo_us;
    let queries = arrivals
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let a = (t * 1e6).round() as Micros;
            Query::new(i as u64, a, a + slo)
        })
        .collect();
    Ok(Trace {
        spec: Some(spec.clone()),
        duration_us: spec.duration_us(),
        queries,
    })
}

/// Bursty trace: deterministic base stream plus a gamma renewal stream.
pub fn gen_bursty(spec: &TraceSpec) -> Result<Trace> {
    match spec.shape {
        TraceShape::Bursty { .. } => generate(spec),
        _ => Err(Error::TraceSpec("expected a bursty spec".into())),
    }
}

/// Gamma arrivals whose mean rate ramps from the start to the end rate.
pub fn gen_time_varying(spec: &TraceSpec) -> Result<Trace> {
    match spec.shape {
        TraceShape::TimeVarying { .. } => generate(spec),
        _ => Err(Error::TraceSpec("expected a time-varying spec".into())),
    }
}

/// Deterministic base rate with periodic one-second bursts.
pub fn gen_spikes(spec: &TraceSpec) -> Result<Trace> {
    match spec.shape {
        TraceShape::Spikes { .. } => generate(spec),
        _ => Err(Error::TraceSpec("expected a spikes spec".into())),
    }
}

/// Start times of the one-second bursts: mid-period, while the burst still
/// fits in the trace.
pub fn spike_starts(period_s: f64, duration_s: f64) -> Vec<f64> {
    let mut starts = Vec::new();
    let mut t = period_s / 2.0;
    while t + 1.0 <= duration_s {
        starts.push(t);
        t += period_s;
    }
    starts
}

fn deterministic_stream(rate: f64, start: f64, end: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let n = ((end - start) * rate).ceil() as u64;
    (0..n)
        .map(|k| start + k as f64 / rate)
        .filter(|&t| t < end)
        .collect()
}

/// Inter-arrival sampler: gamma with shape `1/cv2` and the given mean, or a
/// constant gap when `cv2 == 0`.
struct GapSampler {
    shape: Option<f64>,
}

impl GapSampler {
    fn new(cv2: f64) -> Self {
        GapSampler {
            shape: (cv2 > 0.0).then(|| 1.0 / cv2),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, mean: f64) -> f64 {
        match self.shape {
            Some(k) => Gamma::new(k, mean / k)
                .expect("shape and scale are positive")
                .sample(rng),
            None => mean,
        }
    }
}

fn renewal_stream(rng: &mut ChaCha8Rng, rate: f64, cv2: f64, start: f64, end: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let sampler = GapSampler::new(cv2);
    let mean = 1.0 / rate;
    let mut out = Vec::with_capacity(((end - start) * rate * 1.1) as usize + 1);
    let mut t = start + sampler.sample(rng, mean);
    while t < end {
        out.push(t);
        t += sampler.sample(rng, mean);
    }
    out
}

fn ramp_stream(
    rng: &mut ChaCha8Rng,
    start_rate: f64,
    end_rate: f64,
    acceleration: f64,
    cv2: f64,
    end: f64,
) -> Vec<f64> {
    let rate_at = |t: f64| {
        if acceleration.is_infinite() {
            end_rate
        } else {
            end_rate.min(start_rate + acceleration * t)
        }
    };
    let sampler = GapSampler::new(cv2);
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += sampler.sample(rng, 1.0 / rate_at(t));
        if t >= end {
            break;
        }
        out.push(t);
    }
    out
}
