//! Timing records, recall, redundancy, bandwidth and time breakdowns.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundtruth::GroundTruth;

/// Per-thread time split of one query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadTimes {
    /// Join/merge and threshold work not attributable to a vertex.
    pub serial_ns: u64,
    /// Barrier waits, idling, retries and buffer contention.
    pub sync_ns: u64,
    /// (vertex, nanoseconds) per expansion.
    pub expansions: Vec<(u32, u64)>,
    /// (vertex, nanoseconds) per speculative neighbor scan.
    pub scans: Vec<(u32, u64)>,
    /// Wall time this thread participated in the query.
    pub total_ns: u64,
}

impl ThreadTimes {
    pub fn expand_ns(&self) -> u64 {
        self.expansions.iter().map(|e| e.1).sum()
    }

    pub fn scan_ns(&self) -> u64 {
        self.scans.iter().map(|e| e.1).sum()
    }
}

/// Consecutive-interval timer: each `take` returns the time since the last.
#[derive(Debug)]
pub(crate) struct Lap(pub(crate) Instant);

impl Lap {
    #[allow(dead_code)]
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn take(&mut self) -> u64 {
        let now = Instant::now();
        let ns = now.duration_since(self.0).as_nanos() as u64;
        self.0 = now;
        ns
    }
}

/// Mean over queries of `|results[q][..k] ∩ truth[q][..k]| / k`.
pub fn recall_at_k(results: &[Vec<u32>], truth: &GroundTruth, k: usize) -> Result<f64> {
    if k == 0 || k > truth.k() {
        return Err(Error::usage(format!(
            "recall@{k} needs ground truth with at least {k} neighbors (have {})",
            truth.k()
        )));
    }
    if results.len() != truth.len() {
        return Err(Error::usage(format!(
            "{} result lists for {} ground-truth queries",
            results.len(),
            truth.len()
        )));
    }
    if results.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = results
        .iter()
        .enumerate()
        .map(|(q, r)| query_recall(r, &truth.ids(q), k))
        .sum();
    Ok(total / results.len() as f64)
}

/// Recall of one result list against one true top-K list.
pub fn query_recall(result: &[u32], truth: &[u32], k: usize) -> f64 {
    let truth: HashSet<u32> = truth.iter().take(k).copied().collect();
    let hits = result.iter().take(k).filter(|v| truth.contains(v)).count();
    hits as f64 / k as f64
}

/// Serial-reference expansion set of one query, for redundancy checks.
#[derive(Debug, Clone, Default)]
pub struct ReferenceSet(HashSet<u32>);

impl ReferenceSet {
    pub fn new(serial_trace: impl IntoIterator<Item = u32>) -> Self {
        Self(serial_trace.into_iter().collect())
    }

    pub fn contains(&self, v: u32) -> bool {
        self.0.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// (useful, redundant) expansion counts; they always sum to the length of
/// the parallel trace.
pub fn expansion_counts(parallel: &[u32], serial: &ReferenceSet) -> (u64, u64) {
    let redundant = parallel.iter().filter(|&&v| !serial.contains(v)).count() as u64;
    (parallel.len() as u64 - redundant, redundant)
}

/// Share of the parallel expansions a serial search at the same L would
/// not have performed. Zero for an empty parallel trace.
pub fn redundant_ratio(parallel: &[u32], serial: &ReferenceSet) -> f64 {
    if parallel.is_empty() {
        return 0.0;
    }
    let (_, redundant) = expansion_counts(parallel, serial);
    redundant as f64 / parallel.len() as f64
}

/// Logical bandwidth figures in GB/s (1e9 bytes per second).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub logical_pmb_gbs: f64,
    pub emb_gbs: f64,
}

/// Effective share of a raw bandwidth once redundant work is discounted.
pub fn emb(pmb: f64, rr: f64) -> f64 {
    pmb * (1.0 - rr)
}

pub fn effective_bandwidth(bytes_touched: u64, wall_ns: u64, rr: f64) -> Result<Bandwidth> {
    if wall_ns == 0 {
        return Err(Error::usage("zero wall time: bandwidth undefined"));
    }
    let pmb = bytes_touched as f64 / wall_ns as f64;
    Ok(Bandwidth {
        logical_pmb_gbs: pmb,
        emb_gbs: emb(pmb, rr),
    })
}

/// Thread time of one query split into the four categories, nanoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub serial_ns: u64,
    pub expand_ns: u64,
    pub redundant_ns: u64,
    pub sync_ns: u64,
    /// Sum of the participating threads' wall times.
    pub thread_ns: u64,
}

impl Breakdown {
    /// Attributes each timed expansion or speculative scan to `expand` when
    /// the serial search also expanded that vertex, else to `redundant`.
    pub fn classify(times: &[ThreadTimes], serial: &ReferenceSet) -> Self {
        let mut b = Breakdown::default();
        for t in times {
            b.serial_ns += t.serial_ns;
            b.sync_ns += t.sync_ns;
            b.thread_ns += t.total_ns;
            for &(v, ns) in t.expansions.iter().chain(&t.scans) {
                if serial.contains(v) {
                    b.expand_ns += ns;
                } else {
                    b.redundant_ns += ns;
                }
            }
        }
        b
    }

    pub fn add(&mut self, o: &Breakdown) {
        self.serial_ns += o.serial_ns;
        self.expand_ns += o.expand_ns;
        self.redundant_ns += o.redundant_ns;
        self.sync_ns += o.sync_ns;
        self.thread_ns += o.thread_ns;
    }

    pub fn categorized_ns(&self) -> u64 {
        self.serial_ns + self.expand_ns + self.redundant_ns + self.sync_ns
    }

    /// Category shares of total thread time; they sum to ~1 when the
    /// timers tile each thread's wall time.
    pub fn fractions(&self) -> BreakdownFractions {
        let total = self.thread_ns.max(1) as f64;
        BreakdownFractions {
            serial: self.serial_ns as f64 / total,
            expand: self.expand_ns as f64 / total,
            redundant: self.redundant_ns as f64 / total,
            sync: self.sync_ns as f64 / total,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BreakdownFractions {
    pub serial: f64,
    pub expand: f64,
    pub redundant: f64,
    pub sync: f64,
}

impl BreakdownFractions {
    pub fn sum(&self) -> f64 {
        self.serial + self.expand + self.redundant + self.sync
    }
}

/// Measurements of one query (latency averaged over timed passes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub latency_ns: u64,
    pub ids: Vec<u32>,
    pub expansions: u64,
    pub redundant_expansions: u64,
    pub dist_evals: u64,
    pub bytes_touched: u64,
    pub recall: f64,
    pub rr: f64,
    pub breakdown: Breakdown,
}

/// Engine and parallelism of one configuration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigLabel {
    pub engine: String,
    pub intra: usize,
    pub inter: usize,
    pub l: usize,
    pub k: usize,
    pub threads_per_query: usize,
    pub width: Option<usize>,
    pub groups: Option<usize>,
    pub discal: Option<usize>,
    pub stealing: Option<bool>,
    pub inline_fraction: Option<f32>,
    pub balancer: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub queries: usize,
    pub passes: usize,
    pub qps: f64,
    pub mean_latency_us: f64,
    pub p50_latency_us: f64,
    pub p99_latency_us: f64,
    /// Standard deviation of the per-pass mean latency.
    pub latency_pass_stddev_us: f64,
    /// Absent without ground truth.
    pub recall: Option<f64>,
    pub rr: f64,
    pub logical_bandwidth_gbs: f64,
    pub effective_bandwidth_gbs: f64,
    pub breakdown: BreakdownFractions,
    /// Thread-seconds consumed per wall second, measured from thread timers.
    pub thread_seconds_per_second: f64,
    pub wall_seconds: f64,
    pub target_missed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub config: ConfigLabel,
    pub aggregate: Aggregate,
    pub per_query: Vec<QueryRecord>,
}

impl SearchReport {
    /// Ratio between `QPS × mean latency × threads per query` and the
    /// measured thread-seconds per second; ~1 for a consistent report.
    pub fn sanity_ratio(&self) -> f64 {
        let a = &self.aggregate;
        let predicted = a.qps * a.mean_latency_us * 1e-6 * self.config.threads_per_query as f64;
        predicted / a.thread_seconds_per_second.max(f64::MIN_POSITIVE)
    }
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truth(lists: Vec<Vec<u32>>) -> GroundTruth {
        GroundTruth::from_ids(lists).unwrap()
    }

    #[test]
    fn recall_examples() {
        let gt = truth(vec![(0..100).collect()]);
        assert_eq!(recall_at_k(&[(0..100).collect()], &gt, 100).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[(100..200).collect()], &gt, 100).unwrap(), 0.0);
        let half: Vec<u32> = (50..150).collect();
        assert_eq!(recall_at_k(&[half], &gt, 100).unwrap(), 0.5);
    }

    #[test]
    fn recall_k_mismatch_is_usage_error() {
        let gt = truth(vec![vec![1, 2]]);
        assert!(matches!(recall_at_k(&[vec![1, 2, 3]], &gt, 3), Err(Error::Usage(_))));
        assert!(matches!(recall_at_k(&[], &gt, 2), Err(Error::Usage(_))));
    }

    #[test]
    fn rr_examples() {
        let serial = ReferenceSet::new(0..10);
        assert_eq!(redundant_ratio(&(0..10).collect::<Vec<_>>(), &serial), 0.0);
        let parallel: Vec<u32> = (0..14).collect();
        assert!((redundant_ratio(&parallel, &serial) - 4.0 / 14.0).abs() < 1e-12);
        assert_eq!(redundant_ratio(&[], &serial), 0.0);
    }

    #[test]
    fn bandwidth_examples() {
        let b = effective_bandwidth(1_000_000_000, 1_000_000_000, 0.0).unwrap();
        assert!((b.emb_gbs - 1.0).abs() < 1e-12);
        assert!((emb(89.0, 0.31) - 61.41).abs() < 1e-9);
        assert_eq!(emb(42.0, 1.0), 0.0);
        assert!(effective_bandwidth(10, 0, 0.0).is_err());
    }

    #[test]
    fn breakdown_classifies_against_reference() {
        let serial = ReferenceSet::new([1, 2]);
        let t = ThreadTimes {
            serial_ns: 10,
            sync_ns: 20,
            expansions: vec![(1, 30), (9, 40)],
            scans: vec![(2, 5)],
            total_ns: 105,
        };
        let b = Breakdown::classify(&[t], &serial);
        assert_eq!((b.serial_ns, b.expand_ns, b.redundant_ns, b.sync_ns), (10, 35, 40, 20));
        assert!((b.fractions().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[3.0], 99.0), 3.0);
    }

    proptest! {
        #[test]
        fn counts_partition_the_trace(p in prop::collection::vec(0u32..50, 0..60), s in prop::collection::vec(0u32..50, 0..30)) {
            let serial = ReferenceSet::new(s);
            let (e, r) = expansion_counts(&p, &serial);
            prop_assert_eq!(e + r, p.len() as u64);
            let rr = redundant_ratio(&p, &serial);
            prop_assert!((0.0..=1.0).contains(&rr));
        }

        #[test]
        fn rr_of_serial_against_itself_is_zero(s in prop::collection::vec(0u32..1000, 0..100)) {
            prop_assert_eq!(redundant_ratio(&s, &ReferenceSet::new(s.clone())), 0.0);
        }
    }
}
