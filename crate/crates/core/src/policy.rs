//! Scheduling policies: slack in, `(batch size, subnet)` out.
//!
//! Every policy returns a decision whose profiled latency is strictly below
//! the slack it was given, or `None` when nothing fits and the most urgent
//! query has to be dropped.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::profile::{BucketTable, Catalog, SubnetId};
use crate::{Micros, SignedMicros};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Latency-bucket policy: highest bucket under the slack, largest batch.
    SlackFit,
    /// Largest batch first, then the most accurate subnet at that batch.
    MaxBatch,
    /// Most accurate subnet first, then the largest batch for it.
    MaxAcc,
    /// A single subnet, adaptively batched.
    Fixed(SubnetId),
    /// The least accurate (cheapest) subnet, adaptively batched.
    MinAcc,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::SlackFit => f.write_str("slackfit"),
            PolicyKind::MaxBatch => f.write_str("maxbatch"),
            PolicyKind::MaxAcc => f.write_str("maxacc"),
            PolicyKind::Fixed(id) => write!(f, "fixed:{id}"),
            PolicyKind::MinAcc => f.write_str("minacc"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "slackfit" => Ok(PolicyKind::SlackFit),
            "maxbatch" => Ok(PolicyKind::MaxBatch),
            "maxacc" => Ok(PolicyKind::MaxAcc),
            "minacc" => Ok(PolicyKind::MinAcc),
            other => match other.strip_prefix("fixed:") {
                Some(id) if !id.is_empty() => Ok(PolicyKind::Fixed(SubnetId::new(id))),
                _ => Err(Error::Config(format!(
                    "unknown policy `{other}` (expected slackfit|maxbatch|maxacc|fixed:<id>|minacc)"
                ))),
            },
        }
    }
}

impl Serialize for PolicyKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicyKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A control choice. `subnet` indexes the catalog (ascending accuracy).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub batch_size: u32,
    pub subnet: usize,
    pub predicted_latency_us: Micros,
}

impl Decision {
    pub fn subnet_id<'a>(&self, catalog: &'a Catalog) -> &'a SubnetId {
        &catalog.subnets()[self.subnet].id
    }

    /// What actually runs when only `queue_depth` queries are waiting: the
    /// batch shrinks to the queue and the latency is read at the smallest
    /// profiled batch that holds it.
    pub fn clamp_to_queue(&self, queue_depth: usize, catalog: &Catalog) -> Dispatch {
        let count = (self.batch_size as usize).min(queue_depth).max(1);
        let bi = catalog.batch_index_covering(count);
        Dispatch {
            count,
            profiled_batch: catalog.batch_sizes()[bi],
            subnet: self.subnet,
            latency_us: catalog.latency_at(self.subnet, bi),
        }
    }
}

/// A decision after clamping to the queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub count: usize,
    pub profiled_batch: u32,
    pub subnet: usize,
    pub latency_us: Micros,
}

/// A policy resolved against one catalog.
#[derive(Clone, Debug)]
pub struct Policy {
    kind: PolicyKind,
    fixed: Option<usize>,
}

impl Policy {
    pub fn new(kind: PolicyKind, catalog: &Catalog) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::Catalog("policy needs a non-empty catalog".into()));
        }
        if !catalog.is_pareto() {
            return Err(Error::Catalog("policies run on pareto catalogs".into()));
        }
        let fixed = match &kind {
            PolicyKind::Fixed(id) => Some(
                catalog
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownSubnet(id.to_string()))?,
            ),
            PolicyKind::MinAcc => Some(0),
            _ => None,
        };
        Ok(Policy { kind, fixed })
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    /// Smallest latency this policy could ever pick; a query with less slack
    /// than this cannot be served.
    pub fn min_feasible_latency(&self, catalog: &Catalog) -> Micros {
        match self.fixed {
            Some(s) => catalog.latency_at(s, 0),
            None => catalog.min_latency().expect("non-empty catalog"),
        }
    }

    pub fn decide(
        &self,
        slack: SignedMicros,
        queue_depth: usize,
        buckets: &BucketTable,
        catalog: &Catalog,
    ) -> Option<Decision> {
        self.decide_counted(slack, queue_depth, buckets, catalog, &mut 0)
    }

    /// [`Policy::decide`] that also counts latency-table comparisons made by
    /// the binary searches.
    pub fn decide_counted(
        &self,
        slack: SignedMicros,
        queue_depth: usize,
        buckets: &BucketTable,
        catalog: &Catalog,
        comparisons: &mut u64,
    ) -> Option<Decision> {
        match self.kind {
            PolicyKind::SlackFit => slackfit(slack, queue_depth, buckets, catalog),
            PolicyKind::MaxBatch => max_batch(slack, catalog, comparisons),
            PolicyKind::MaxAcc => max_acc(slack, catalog, comparisons),
            PolicyKind::Fixed(_) | PolicyKind::MinAcc => {
                fixed(self.fixed.expect("resolved"), slack, catalog, comparisons)
            }
        }
    }
}

/// Resolves `kind` against the catalog and decides once.
pub fn decide(
    kind: &PolicyKind,
    slack: SignedMicros,
    queue_depth: usize,
    buckets: &BucketTable,
    catalog: &Catalog,
) -> Result<Option<Decision>> {
    Ok(Policy::new(kind.clone(), catalog)?.decide(slack, queue_depth, buckets, catalog))
}

/// Start at the highest bucket whose upper bound is within the slack and
/// descend until a bucket offers an entry that fits both the slack and the
/// queue; take its largest batch, ties to higher accuracy.
///
/// Entries whose batch is larger than the smallest profiled batch holding the
/// whole queue are skipped: they would run clamped anyway, so a queue of one
/// query competes on accuracy rather than on a batch it cannot fill.
fn slackfit(
    slack: SignedMicros,
    queue_depth: usize,
    buckets: &BucketTable,
    catalog: &Catalog,
) -> Option<Decision> {
    let start = buckets.start_bucket(slack)?;
    let cap = catalog.batch_sizes()[catalog.batch_index_covering(queue_depth.max(1))];
    buckets.buckets[..=start].iter().rev().find_map(|bucket| {
        bucket
            .entries
            .iter()
            .find(|e| e.batch <= cap && (e.latency_us as SignedMicros) < slack)
            .map(|e| Decision {
                batch_size: e.batch,
                subnet: e.subnet,
                predicted_latency_us: e.latency_us,
            })
    })
}

/// Largest index in `0..n` with `latency(i) < slack`, by binary search over a
/// latency sequence increasing in `i`.
fn last_below(
    n: usize,
    slack: SignedMicros,
    latency: impl Fn(usize) -> Micros,
    comparisons: &mut u64,
) -> Option<usize> {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        *comparisons += 1;
        if (latency(mid) as SignedMicros) < slack {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo.checked_sub(1)
}

fn decision(catalog: &Catalog, subnet: usize, batch_idx: usize) -> Decision {
    Decision {
        batch_size: catalog.batch_sizes()[batch_idx],
        subnet,
        predicted_latency_us: catalog.latency_at(subnet, batch_idx),
    }
}

fn max_batch(slack: SignedMicros, catalog: &Catalog, comparisons: &mut u64) -> Option<Decision> {
    let nb = catalog.batch_sizes().len();
    let b = last_below(nb, slack, |j| catalog.latency_at(0, j), comparisons)?;
    let s = last_below(
        catalog.len(),
        slack,
        |i| catalog.latency_at(i, b),
        comparisons,
    )
    .expect("the cheapest subnet fits");
    Some(decision(catalog, s, b))
}

fn max_acc(slack: SignedMicros, catalog: &Catalog, comparisons: &mut u64) -> Option<Decision> {
    let s = last_below(
        catalog.len(),
        slack,
        |i| catalog.latency_at(i, 0),
        comparisons,
    )?;
    let nb = catalog.batch_sizes().len();
    let b =
        last_below(nb, slack, |j| catalog.latency_at(s, j), comparisons).expect("batch one fits");
    Some(decision(catalog, s, b))
}

fn fixed(
    subnet: usize,
    slack: SignedMicros,
    catalog: &Catalog,
    comparisons: &mut u64,
) -> Option<Decision> {
    let nb = catalog.batch_sizes().len();
    let b = last_below(nb, slack, |j| catalog.latency_at(subnet, j), comparisons)?;
    Some(decision(catalog, subnet, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_buckets, SubnetRecord, DEFAULT_BUCKET_COUNT};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DEEP: usize = 1 << 20;

    fn default_setup() -> (Catalog, BucketTable) {
        let cat = Catalog::synthetic_default();
        let b = build_buckets(&cat, DEFAULT_BUCKET_COUNT).unwrap();
        (cat, b)
    }

    /// Independent SlackFit oracle: scan every (B, subnet) pair, find the
    /// highest bucket (by index arithmetic on floats) whose upper bound is
    /// within the slack and that holds a feasible pair, then take its largest
    /// batch and, among those, the highest accuracy.
    fn slackfit_scan(cat: &Catalog, count: usize, slack: i64) -> Option<(u32, usize)> {
        let lo = cat.min_latency().unwrap() as f64;
        let hi = cat.max_latency().unwrap() as f64;
        let width = (hi - lo) / count as f64;
        let bucket_of = |l: f64| (((l - lo) / width).floor() as usize).min(count - 1);
        let mut pairs = Vec::new();
        for (s, rec) in cat.subnets().iter().enumerate() {
            for &(b, l) in rec.profile() {
                if (l as i64) < slack {
                    pairs.push((bucket_of(l as f64), b, s));
                }
            }
        }
        let top = (0..count)
            .rev()
            .find(|&i| lo + (i + 1) as f64 * width <= slack as f64)
            .unwrap_or(0);
        pairs
            .into_iter()
            .filter(|&(k, _, _)| k <= top)
            .max_by_key(|&(k, b, s)| (k, b, s))
            .map(|(_, b, s)| (b, s))
    }

    #[test]
    fn slackfit_matches_scan_at_36ms() {
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
        let d = p.decide(36_000, DEEP, &buckets, &cat).unwrap();
        assert_eq!(
            Some((d.batch_size, d.subnet)),
            slackfit_scan(&cat, 20, 36_000)
        );
        // Bucket [28.2, 34.4) ms holds (64, sub-0) at 31.8 ms.
        assert_eq!(
            (d.batch_size, d.subnet, d.predicted_latency_us),
            (64, 0, 31_800)
        );
    }

    #[test]
    fn slackfit_matches_scan_everywhere() {
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
        for slack in (0..140_000).step_by(37) {
            let got = p
                .decide(slack, DEEP, &buckets, &cat)
                .map(|d| (d.batch_size, d.subnet));
            assert_eq!(got, slackfit_scan(&cat, 20, slack), "slack {slack}");
        }
    }

    #[test]
    fn infeasible_slack_drops() {
        let (cat, buckets) = default_setup();
        for kind in [
            PolicyKind::SlackFit,
            PolicyKind::MaxBatch,
            PolicyKind::MaxAcc,
            PolicyKind::MinAcc,
        ] {
            let p = Policy::new(kind, &cat).unwrap();
            assert_eq!(p.decide(2_000, DEEP, &buckets, &cat), None);
            assert_eq!(p.decide(3_450, DEEP, &buckets, &cat), None);
            assert_eq!(p.decide(-5, DEEP, &buckets, &cat), None);
        }
    }

    #[test]
    fn max_acc_unconstrained() {
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::MaxAcc, &cat).unwrap();
        let d = p.decide(10_000_000, DEEP, &buckets, &cat).unwrap();
        assert_eq!((d.subnet, d.batch_size), (5, 64));
    }

    #[test]
    fn max_batch_and_max_acc_examples() {
        let (cat, buckets) = default_setup();
        let mb = Policy::new(PolicyKind::MaxBatch, &cat).unwrap();
        let ma = Policy::new(PolicyKind::MaxAcc, &cat).unwrap();
        // 36 ms: batch 64 only fits sub-0 (31.8 ms).
        let d = mb.decide(36_000, 1, &buckets, &cat).unwrap();
        assert_eq!((d.batch_size, d.subnet), (64, 0));
        // sub-5 at batch 8 is 26.4 ms, batch 16 is 40.8 ms.
        let d = ma.decide(36_000, 1, &buckets, &cat).unwrap();
        assert_eq!((d.batch_size, d.subnet), (8, 5));
    }

    #[test]
    fn fixed_and_minacc() {
        let (cat, buckets) = default_setup();
        let f = Policy::new(PolicyKind::Fixed(SubnetId::new("sub-3")), &cat).unwrap();
        let d = f.decide(36_000, DEEP, &buckets, &cat).unwrap();
        // sub-3: c = 7, batch 16 is 23.8 ms, batch 32 is 40.6 ms.
        assert_eq!((d.batch_size, d.subnet), (16, 3));
        assert!(Policy::new(PolicyKind::Fixed(SubnetId::new("nope")), &cat).is_err());
        let m = Policy::new(PolicyKind::MinAcc, &cat).unwrap();
        for slack in [4_000, 10_000, 36_000, 1_000_000] {
            assert_eq!(m.decide(slack, DEEP, &buckets, &cat).unwrap().subnet, 0);
        }
    }

    #[test]
    fn short_queue_caps_slackfit_batch() {
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
        // One waiting query: only batch-1 entries compete, so the most
        // accurate subnet whose batch-1 latency sits under the slack wins.
        let d = p.decide(36_000, 1, &buckets, &cat).unwrap();
        assert_eq!((d.batch_size, d.subnet), (1, 5));
        let d = p.decide(36_000, 3, &buckets, &cat).unwrap();
        assert!(d.batch_size <= 4);
    }

    #[test]
    fn clamp_uses_covering_batch() {
        let cat = Catalog::synthetic_default();
        let d = Decision {
            batch_size: 64,
            subnet: 2,
            predicted_latency_us: cat.latency_at(2, 6),
        };
        let plan = d.clamp_to_queue(3, &cat);
        assert_eq!((plan.count, plan.profiled_batch), (3, 4));
        assert_eq!(plan.latency_us, cat.subnets()[2].latency(4).unwrap());
        assert!(plan.latency_us <= d.predicted_latency_us);
        assert_eq!(d.clamp_to_queue(500, &cat).count, 64);
    }

    #[test]
    fn policy_names_round_trip() {
        for s in ["slackfit", "maxbatch", "maxacc", "minacc", "fixed:sub-2"] {
            assert_eq!(s.parse::<PolicyKind>().unwrap().to_string(), s);
        }
        assert!("fixed:".parse::<PolicyKind>().is_err());
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    /// Pareto catalog with `n` subnets: every subnet is slower and more
    /// accurate than the previous one at every batch size.
    fn ordered_catalog(rng: &mut ChaCha8Rng, n: usize, batches: &[u32]) -> Catalog {
        let (mut base, mut per, mut acc) = (0u64, 0u64, 60.0);
        let recs = (0..n)
            .map(|k| {
                base += rng.gen_range(200..3_000);
                per += rng.gen_range(10..300);
                acc += rng.gen_range(0.1..3.0);
                let lat = batches
                    .iter()
                    .map(|&b| (b, base + per * b as u64))
                    .collect();
                SubnetRecord::new(SubnetId::new(format!("s{k}")), acc, lat).unwrap()
            })
            .collect();
        Catalog::new(recs).unwrap()
    }

    const GRID: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

    fn bucket_of(buckets: &BucketTable, d: &Decision) -> usize {
        buckets.index_of(d.predicted_latency_us)
    }

    proptest! {
        #[test]
        fn slackfit_never_drops_to_lower_bucket_with_more_slack(
            seed in any::<u64>(),
            n in 1usize..7,
            count in 1usize..30,
            depth in 1usize..100,
            a in 0i64..300_000,
            b in 0i64..300_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cat = ordered_catalog(&mut rng, n, &GRID);
            let buckets = build_buckets(&cat, count).unwrap();
            let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            if let Some(low) = p.decide(lo, depth, &buckets, &cat) {
                let high = p.decide(hi, depth, &buckets, &cat).expect("more slack stays feasible");
                prop_assert!(bucket_of(&buckets, &high) >= bucket_of(&buckets, &low));
            }
        }

        #[test]
        fn every_decision_fits_the_slack(
            seed in any::<u64>(),
            n in 1usize..7,
            depth in 1usize..100,
            slack in -1_000i64..300_000,
            which in 0usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cat = ordered_catalog(&mut rng, n, &GRID);
            let buckets = build_buckets(&cat, DEFAULT_BUCKET_COUNT).unwrap();
            let kind = [PolicyKind::SlackFit, PolicyKind::MaxBatch, PolicyKind::MaxAcc, PolicyKind::MinAcc][which].clone();
            let p = Policy::new(kind, &cat).unwrap();
            match p.decide(slack, depth, &buckets, &cat) {
                Some(d) => {
                    prop_assert!((d.predicted_latency_us as i64) < slack);
                    prop_assert_eq!(cat.subnets()[d.subnet].latency(d.batch_size), Some(d.predicted_latency_us));
                }
                None => prop_assert!(slack <= p.min_feasible_latency(&cat) as i64),
            }
        }
    }

    /// Upper bounds of the default buckets, as slack values.
    fn boundary_grid(buckets: &BucketTable) -> Vec<i64> {
        buckets
            .buckets
            .iter()
            .map(|b| b.hi_us.ceil() as i64)
            .collect()
    }

    #[test]
    fn single_query_accuracy_grows_with_slack() {
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
        let accs: Vec<f64> = boundary_grid(&buckets)
            .into_iter()
            .filter_map(|t| p.decide(t, 1, &buckets, &cat))
            .map(|d| cat.subnets()[d.subnet].accuracy)
            .collect();
        assert_eq!(accs.len(), 20);
        assert!(accs.windows(2).all(|w| w[0] <= w[1]), "{accs:?}");
    }

    #[test]
    fn deep_queue_accuracy_is_not_monotone_in_slack() {
        // With a deep queue the largest batch of each bucket wins, and the
        // default profile interleaves subnets across buckets: 22.0 ms picks
        // (32, sub-0) but 28.2 ms picks (32, sub-1), then 34.4 ms is back to
        // (64, sub-0).
        let (cat, buckets) = default_setup();
        let p = Policy::new(PolicyKind::SlackFit, &cat).unwrap();
        let picks: Vec<(u32, usize)> = boundary_grid(&buckets)[..6]
            .iter()
            .map(|&t| p.decide(t, DEEP, &buckets, &cat).unwrap())
            .map(|d| (d.batch_size, d.subnet))
            .collect();
        assert_eq!(picks, [(8, 1), (16, 1), (32, 0), (32, 1), (64, 0), (64, 0)]);
    }

    #[test]
    fn max_batch_packs_at_least_slackfit_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut equal_batch_more_accurate = 0;
        for _ in 0..1000 {
            let n = rng.gen_range(1..8);
            let cat = ordered_catalog(&mut rng, n, &GRID);
            let buckets = build_buckets(&cat, DEFAULT_BUCKET_COUNT).unwrap();
            let slack = rng
                .gen_range(cat.min_latency().unwrap() + 1..=2 * cat.max_latency().unwrap())
                as i64;
            let s = Policy::new(PolicyKind::SlackFit, &cat)
                .unwrap()
                .decide(slack, DEEP, &buckets, &cat)
                .unwrap();
            let m = Policy::new(PolicyKind::MaxBatch, &cat)
                .unwrap()
                .decide(slack, DEEP, &buckets, &cat)
                .unwrap();
            assert!(m.batch_size >= s.batch_size);
            if m.batch_size > s.batch_size {
                assert!(
                    m.subnet <= s.subnet,
                    "larger batch must not cost less accuracy"
                );
            } else if m.subnet > s.subnet {
                // Same batch: MaxBatch takes the most accurate subnet that
                // fits, SlackFit may have settled in a lower bucket.
                equal_batch_more_accurate += 1;
            }
        }
        assert_eq!(equal_batch_more_accurate, 13);
    }

    fn grid_catalog(subnets: usize, batches: usize) -> Catalog {
        let grid: Vec<u32> = (1..=batches as u32).collect();
        let recs = (0..subnets)
            .map(|s| {
                let lat = grid
                    .iter()
                    .map(|&b| (b, 1_000 * (s as u64 + 1) + 10 * b as u64))
                    .collect();
                SubnetRecord::new(SubnetId::new(format!("s{s}")), 50.0 + s as f64 * 0.01, lat)
                    .unwrap()
            })
            .collect();
        Catalog::new(recs).unwrap()
    }

    /// Worst-case comparison count over a dense slack sweep.
    fn worst_comparisons(kind: PolicyKind, cat: &Catalog) -> u64 {
        let buckets = build_buckets(cat, 1).unwrap();
        let p = Policy::new(kind, cat).unwrap();
        let max = cat.max_latency().unwrap() as i64;
        (0..=max + 1_000)
            .step_by(97)
            .map(|slack| {
                let mut c = 0;
                p.decide_counted(slack, DEEP, &buckets, cat, &mut c);
                c
            })
            .max()
            .unwrap()
    }

    #[test]
    fn binary_search_policies_are_logarithmic() {
        for kind in [PolicyKind::MaxBatch, PolicyKind::MaxAcc] {
            // Default shape: 6 subnets, 7 batch sizes.
            let c = worst_comparisons(kind.clone(), &grid_catalog(6, 7));
            assert!(c <= 2 * (3 + 3) + 2, "{kind}: {c}");
            assert!(worst_comparisons(kind.clone(), &grid_catalog(1, 1)) <= 2);
            // Doubling both dimensions adds at most one comparison each.
            let mut prev = None;
            for size in [8usize, 16, 32, 64, 128, 256, 512, 1024] {
                let c = worst_comparisons(kind.clone(), &grid_catalog(size, size));
                if let Some(p) = prev {
                    assert!(c <= p + 2, "{kind} at {size}: {p} -> {c}");
                }
                prev = Some(c);
            }
        }
    }

    #[test]
    fn rejects_non_pareto_catalog() {
        let cat = Catalog::new(vec![
            SubnetRecord::new(SubnetId::new("a"), 70.0, vec![(1, 10)]).unwrap(),
            SubnetRecord::new(SubnetId::new("b"), 75.0, vec![(1, 8)]).unwrap(),
        ])
        .unwrap();
        assert!(Policy::new(PolicyKind::SlackFit, &cat).is_err());
    }
}
