//! Subnet catalog, latency profiles, latency buckets and the memory model.
//!
//! A [`Catalog`] holds the profiled subnets of one supernet. Each
//! [`SubnetRecord`] carries an accuracy and a latency per batch size; the
//! catalog keeps records sorted by accuracy and remembers whether they form a
//! pareto front (latency strictly increasing with accuracy at every batch
//! size). Policies only run on pareto catalogs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Micros, SignedMicros};

/// Column header of the profile CSV format.
pub const PROFILE_CSV_HEADER: &str = "subnet_id,accuracy,gflops,batch,latency_us";

/// Bucket count used when none is configured.
pub const DEFAULT_BUCKET_COUNT: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubnetId(pub String);

impl SubnetId {
    pub fn new(id: impl Into<String>) -> Self {
        SubnetId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubnetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Architecture knobs selecting one subnet out of the supernet: per-stage
/// depth flags, per-layer expansion ratios and per-layer width multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnetConfig {
    depth_flags: Vec<bool>,
    expand_ratios: Vec<f64>,
    width_multipliers: Vec<f64>,
}

impl SubnetConfig {
    pub fn new(
        depth_flags: Vec<bool>,
        expand_ratios: Vec<f64>,
        width_multipliers: Vec<f64>,
    ) -> Result<Self> {
        if depth_flags.is_empty() || expand_ratios.is_empty() || width_multipliers.is_empty() {
            return Err(Error::Catalog(
                "subnet config lists must be non-empty".into(),
            ));
        }
        if expand_ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Catalog("expand ratios must be positive".into()));
        }
        if width_multipliers
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0 && *w <= 1.0))
        {
            return Err(Error::Catalog(
                "width multipliers must lie in (0, 1]".into(),
            ));
        }
        Ok(SubnetConfig {
            depth_flags,
            expand_ratios,
            width_multipliers,
        })
    }

    pub fn depth_flags(&self) -> &[bool] {
        &self.depth_flags
    }

    pub fn expand_ratios(&self) -> &[f64] {
        &self.expand_ratios
    }

    pub fn width_multipliers(&self) -> &[f64] {
        &self.width_multipliers
    }

    pub fn mean_width(&self) -> f64 {
        self.width_multipliers.iter().sum::<f64>() / self.width_multipliers.len() as f64
    }
}

/// One profiled subnet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnetRecord {
    pub id: SubnetId,
    pub config: Option<SubnetConfig>,
    /// Top-1 accuracy in percent.
    pub accuracy: f64,
    pub gflops: Option<f64>,
    /// `(batch size, latency)` sorted by batch size.
    latency: Vec<(u32, Micros)>,
}

impl SubnetRecord {
    /// Builds a record, rejecting profiles whose latency does not strictly
    /// increase with batch size.
    pub fn new(id: SubnetId, accuracy: f64, mut latency: Vec<(u32, Micros)>) -> Result<Self> {
        if !(accuracy.is_finite() && (0.0..=100.0).contains(&accuracy)) {
            return Err(Error::Catalog(format!(
                "subnet {id}: accuracy {accuracy} outside [0, 100]"
            )));
        }
        if latency.is_empty() {
            return Err(Error::Catalog(format!(
                "subnet {id}: empty latency profile"
            )));
        }
        latency.sort_by_key(|&(b, _)| b);
        for w in latency.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Catalog(format!(
                    "subnet {id}: batch {} profiled twice",
                    w[0].0
                )));
            }
        }
        for &(b, l) in &latency {
            if b == 0 || l == 0 {
                return Err(Error::Catalog(format!(
                    "subnet {id}: batch and latency must be positive (batch {b}, latency {l})"
                )));
            }
        }
        for w in latency.windows(2) {
            if w[1].1 <= w[0].1 {
                return Err(Error::NonMonotonicLatency {
                    subnet: id.0.clone(),
                    smaller_batch: w[0].0,
                    larger_batch: w[1].0,
                });
            }
        }
        Ok(SubnetRecord {
            id,
            config: None,
            accuracy,
            gflops: None,
            latency,
        })
    }

    pub fn with_config(mut self, config: SubnetConfig) -> Self {
        self.config = Some(config);
        self
    }

    pub fn with_gflops(mut self, gflops: f64) -> Self {
        self.gflops = Some(gflops);
        self
    }

    pub fn profile(&self) -> &[(u32, Micros)] {
        &self.latency
    }

    pub fn latency(&self, batch: u32) -> Option<Micros> {
        self.latency
            .binary_search_by_key(&batch, |&(b, _)| b)
            .ok()
            .map(|i| self.latency[i].1)
    }

    pub fn min_latency(&self) -> Micros {
        self.latency[0].1
    }

    pub fn max_latency(&self) -> Micros {
        self.latency[self.latency.len() - 1].1
    }

    /// Queries per second one worker sustains, maximized over batch size.
    pub fn peak_throughput(&self) -> f64 {
        self.latency
            .iter()
            .map(|&(b, l)| b as f64 * 1e6 / l as f64)
            .fold(0.0, f64::max)
    }
}

/// A set of subnets sharing one batch-size grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    subnets: Vec<SubnetRecord>,
    batch_sizes: Vec<u32>,
    pareto: bool,
}

impl Catalog {
    /// Sorts records by `(accuracy, id)`, checks id uniqueness and a common
    /// batch grid, and computes the pareto flag.
    pub fn new(mut subnets: Vec<SubnetRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &subnets {
            if !seen.insert(s.id.clone()) {
                return Err(Error::Catalog(format!("duplicate subnet id {}", s.id)));
            }
        }
        subnets.sort_by(|a, b| {
            a.accuracy
                .total_cmp(&b.accuracy)
                .then_with(|| a.id.cmp(&b.id))
        });
        let batch_sizes: Vec<u32> = subnets
            .first()
            .map(|s| s.latency.iter().map(|&(b, _)| b).collect())
            .unwrap_or_default();
        for s in &subnets {
            if s.latency.len() != batch_sizes.len()
                || s.latency
                    .iter()
                    .zip(&batch_sizes)
                    .any(|(&(b, _), &g)| b != g)
            {
                return Err(Error::Catalog(format!(
                    "subnet {} does not share the catalog batch grid {:?}",
                    s.id, batch_sizes
                )));
            }
        }
        let pareto = is_pareto_sorted(&subnets, batch_sizes.len());
        Ok(Catalog {
            subnets,
            batch_sizes,
            pareto,
        })
    }

    pub fn subnets(&self) -> &[SubnetRecord] {
        &self.subnets
    }

    pub fn len(&self) -> usize {
        self.subnets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subnets.is_empty()
    }

    pub fn batch_sizes(&self) -> &[u32] {
        &self.batch_sizes
    }

    pub fn max_batch(&self) -> u32 {
        self.batch_sizes.last().copied().unwrap_or(0)
    }

    /// True when records sorted by accuracy have strictly increasing accuracy
    /// and strictly increasing latency at every batch size.
    pub fn is_pareto(&self) -> bool {
        self.pareto
    }

    pub fn index_of(&self, id: &SubnetId) -> Option<usize> {
        self.subnets.iter().position(|s| &s.id == id)
    }

    pub fn get(&self, id: &SubnetId) -> Option<&SubnetRecord> {
        self.subnets.iter().find(|s| &s.id == id)
    }

    /// Latency of subnet `subnet` at batch-grid position `batch_idx`.
    #[inline]
    pub fn latency_at(&self, subnet: usize, batch_idx: usize) -> Micros {
        self.subnets[subnet].latency[batch_idx].1
    }

    /// Index of the smallest profiled batch size that holds `count` queries,
    /// or the largest one when `count` exceeds the grid.
    pub fn batch_index_covering(&self, count: usize) -> usize {
        let idx = self.batch_sizes.partition_point(|&b| (b as usize) < count);
        idx.min(self.batch_sizes.len().saturating_sub(1))
    }

    pub fn min_latency(&self) -> Option<Micros> {
        self.subnets.iter().map(SubnetRecord::min_latency).min()
    }

    pub fn max_latency(&self) -> Option<Micros> {
        self.subnets.iter().map(SubnetRecord::max_latency).max()
    }

    /// The synthetic six-subnet profile: `l(B) = c * (1 + 0.15 B)` ms with
    /// `c` in {3, 4, 5, 7, 9, 12} over batch sizes 1..=64 (powers of two).
    pub fn synthetic_default() -> Catalog {
        const SCALES: [u64; 6] = [3, 4, 5, 7, 9, 12];
        const ACCURACIES: [f64; 6] = [73.82, 76.69, 77.64, 78.25, 79.44, 80.16];
        const BATCHES: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];
        let subnets = SCALES
            .iter()
            .zip(ACCURACIES)
            .enumerate()
            .map(|(i, (&c, acc))| {
                let latency = BATCHES
                    .iter()
                    .map(|&b| (b, c * (1000 + 150 * b as u64)))
                    .collect();
                let width = c as f64 / 12.0;
                let config = SubnetConfig::new(
                    (0..5).map(|stage| stage < 2 + i.div_ceil(2)).collect(),
                    vec![3.0 + i as f64 * 0.6; 20],
                    vec![width; 20],
                )
                .expect("static config is valid");
                SubnetRecord::new(SubnetId(format!("sub-{i}")), acc, latency)
                    .expect("static profile is monotone")
                    .with_config(config)
                    .with_gflops(0.15 * c as f64)
            })
            .collect();
        Catalog::new(subnets).expect("static catalog is valid")
    }

    /// Writes the catalog in the profile CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PROFILE_CSV_HEADER);
        out.push('\n');
        for s in &self.subnets {
            let gflops = s.gflops.map(|g| g.to_string()).unwrap_or_default();
            for &(b, l) in &s.latency {
                out.push_str(&format!("{},{},{},{},{}\n", s.id, s.accuracy, gflops, b, l));
            }
        }
        out
    }
}

fn is_pareto_sorted(subnets: &[SubnetRecord], grid_len: usize) -> bool {
    subnets.windows(2).all(|w| {
        w[0].accuracy < w[1].accuracy
            && (0..grid_len).all(|j| w[0].latency[j].1 < w[1].latency[j].1)
    })
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    subnet_id: String,
    accuracy: f64,
    gflops: Option<f64>,
    batch: u32,
    latency_us: Micros,
}

/// Reads and validates a profile CSV file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(&text)
}

/// Parses profile CSV text (`subnet_id,accuracy,gflops,batch,latency_us`).
pub fn parse_catalog(text: &str) -> Result<Catalog> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let expected: Vec<&str> = PROFILE_CSV_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{PROFILE_CSV_HEADER}`"),
        });
    }

    struct Pending {
        accuracy: f64,
        gflops: Option<f64>,
        latency: Vec<(u32, Micros)>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Pending> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: ProfileRow = record.deserialize(None).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.subnet_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty subnet_id".into(),
            });
        }
        match rows.get_mut(&row.subnet_id) {
            Some(p) => {
                if p.accuracy != row.accuracy {
                    return Err(Error::Parse {
                        line,
                        message: format!("subnet {} changes accuracy", row.subnet_id),
                    });
                }
                if p.latency.iter().any(|&(b, _)| b == row.batch) {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "subnet {} batch {} listed twice",
                            row.subnet_id, row.batch
                        ),
                    });
                }
                p.latency.push((row.batch, row.latency_us));
            }
            None => {
                order.push(row.subnet_id.clone());
                rows.insert(
                    row.subnet_id,
                    Pending {
                        accuracy: row.accuracy,
                        gflops: row.gflops,
                        latency: vec![(row.batch, row.latency_us)],
                    },
                );
            }
        }
    }

    let mut subnets = Vec::with_capacity(order.len());
    for id in order {
        let p = rows.remove(&id).expect("id recorded on first sight");
        let mut rec = SubnetRecord::new(SubnetId(id), p.accuracy, p.latency)?;
        rec.gflops = p.gflops;
        subnets.push(rec);
    }
    Catalog::new(subnets)
}

/// Keeps the subnets not dominated at the smallest batch size.
///
/// `a` dominates `b` when `a` has accuracy `>=` and latency `<=` with at least
/// one strict. Among identical `(accuracy, latency)` pairs the
/// lexicographically smallest id survives.
pub fn pareto_filter(catalog: &Catalog) -> Catalog {
    let subnets = catalog.subnets();
    let key = |s: &SubnetRecord| (s.accuracy, s.min_latency());
    let kept: Vec<SubnetRecord> = subnets
        .iter()
        .filter(|s| {
            let (acc, lat) = key(s);
            !subnets.iter().any(|o| {
                if std::ptr::eq(*s, o) {
                    return false;
                }
                let (oa, ol) = key(o);
                let dominates = oa >= acc && ol <= lat && (oa > acc || ol < lat);
                let identical_and_earlier = oa == acc && ol == lat && o.id < s.id;
                dominates || identical_and_earlier
            })
        })
        .cloned()
        .collect();
    Catalog::new(kept).expect("subset of a valid catalog is valid")
}

/// One `(batch, subnet)` control choice in a bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketEntry {
    pub batch: u32,
    /// Position of the subnet in the catalog (ascending accuracy).
    pub subnet: usize,
    pub latency_us: Micros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo_us: f64,
    pub hi_us: f64,
    /// Sorted by batch descending, then accuracy descending.
    pub entries: Vec<BucketEntry>,
}

impl Bucket {
    /// Entry with the largest batch, ties going to the higher accuracy.
    pub fn best(&self) -> Option<&BucketEntry> {
        self.entries.first()
    }
}

/// Equal-width latency buckets spanning the profiled latency range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    min_us: Micros,
    max_us: Micros,
    pub bucket_width_us: f64,
    pub buckets: Vec<Bucket>,
}

impl BucketTable {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn min_latency(&self) -> Micros {
        self.min_us
    }

    pub fn max_latency(&self) -> Micros {
        self.max_us
    }

    /// Bucket holding a latency inside `[min, max]`.
    pub fn index_of(&self, latency: Micros) -> usize {
        let span = self.max_us - self.min_us;
        if span == 0 {
            return 0;
        }
        let n = self.buckets.len() as u128;
        let idx = (latency.saturating_sub(self.min_us) as u128 * n) / span as u128;
        (idx as usize).min(self.buckets.len() - 1)
    }

    /// Bucket where a SlackFit search for `slack` starts: the highest bucket
    /// whose upper bound is `<= slack` (exact integer arithmetic), or the
    /// first bucket when the slack falls inside it. `None` when the slack
    /// does not exceed the smallest profiled latency.
    pub fn start_bucket(&self, slack: SignedMicros) -> Option<usize> {
        if slack <= self.min_us as SignedMicros {
            return None;
        }
        let span = self.max_us - self.min_us;
        if span == 0 {
            return Some(0);
        }
        let n = self.buckets.len() as u128;
        let reached = (slack as u128 - self.min_us as u128) * n / span as u128;
        Some((reached.saturating_sub(1) as usize).min(self.buckets.len() - 1))
    }
}

/// Partitions all `(batch, subnet)` pairs of a pareto catalog into
/// `bucket_count` equal-width latency buckets.
pub fn build_buckets(catalog: &Catalog, bucket_count: usize) -> Result<BucketTable> {
    if catalog.is_empty() {
        return Err(Error::Catalog("cannot bucket an empty catalog".into()));
    }
    if !catalog.is_pareto() {
        return Err(Error::Catalog("bucket table needs a pareto catalog".into()));
    }
    if bucket_count == 0 {
        return Err(Error::Config("bucket count must be positive".into()));
    }
    let min_us = catalog.min_latency().expect("non-empty");
    let max_us = catalog.max_latency().expect("non-empty");
    let width = (max_us - min_us) as f64 / bucket_count as f64;
    let mut table = BucketTable {
        min_us,
        max_us,
        bucket_width_us: width,
        buckets: (0..bucket_count)
            .map(|i| Bucket {
                lo_us: min_us as f64 + i as f64 * width,
                hi_us: if i + 1 == bucket_count {
                    max_us as f64
                } else {
                    min_us as f64 + (i + 1) as f64 * width
                },
                entries: Vec::new(),
            })
            .collect(),
    };
    for (s, rec) in catalog.subnets().iter().enumerate() {
        for &(batch, latency_us) in rec.profile() {
            let idx = table.index_of(latency_us);
            table.buckets[idx].entries.push(BucketEntry {
                batch,
                subnet: s,
                latency_us,
            });
        }
    }
    for b in &mut table.buckets {
        b.entries
            .sort_by(|x, y| y.batch.cmp(&x.batch).then(y.subnet.cmp(&x.subnet)));
    }
    Ok(table)
}

/// Inputs of the supernet memory model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySpec {
    /// Bytes of the weight-shared (non-normalization) layers.
    pub shared_weight_bytes: u64,
    /// Bytes of per-subnet normalization statistics (mean and variance).
    pub per_subnet_stat_bytes: u64,
    pub subnet_count: u64,
    /// Mean width multiplier per subnet, used to size standalone copies.
    /// Subnets past the end of the list count as full width.
    #[serde(default)]
    pub width_means: Vec<f64>,
}

impl MemorySpec {
    /// Parses the `key = value` config block.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: MemorySpec = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if spec
            .width_means
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0 && *w <= 1.0))
        {
            return Err(Error::Config("width means must lie in (0, 1]".into()));
        }
        Ok(spec)
    }

    /// Memory spec for a catalog whose records carry subnet configs.
    pub fn from_catalog(
        shared_weight_bytes: u64,
        per_subnet_stat_bytes: u64,
        catalog: &Catalog,
    ) -> Self {
        MemorySpec {
            shared_weight_bytes,
            per_subnet_stat_bytes,
            subnet_count: catalog.len() as u64,
            width_means: catalog
                .subnets()
                .iter()
                .map(|s| s.config.as_ref().map_or(1.0, SubnetConfig::mean_width))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub supernet_bytes: u64,
    pub individual_bytes_estimate: f64,
    pub stat_fraction: f64,
}

/// Supernet footprint (shared layers plus per-subnet statistics) against the
/// cost of storing every subnet as a standalone model.
pub fn memory_footprint(spec: &MemorySpec) -> MemoryFootprint {
    let stats = spec.subnet_count.saturating_mul(spec.per_subnet_stat_bytes);
    let supernet_bytes = spec.shared_weight_bytes.saturating_add(stats);
    let individual_bytes_estimate = (0..spec.subnet_count)
        .map(|k| {
            let width = spec.width_means.get(k as usize).copied().unwrap_or(1.0);
            spec.shared_weight_bytes as f64 * width
        })
        .sum();
    let stat_fraction = if supernet_bytes == 0 {
        0.0
    } else {
        stats as f64 / supernet_bytes as f64
    };
    MemoryFootprint {
        supernet_bytes,
        individual_bytes_estimate,
        stat_fraction,
    }
}
