//! Benchmark driver: runs one engine over a query set for every cell of an
//! `intra × inter` grid and aggregates the measurements.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asynch::{AsyncParams, AsyncSearcher};
use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::groundtruth::GroundTruth;
use crate::metrics::{
    effective_bandwidth, expansion_counts, percentile, query_recall, Aggregate, Breakdown, ConfigLabel, QueryRecord,
    ReferenceSet, SearchReport, ThreadTimes,
};
use crate::pathwise::{PathwiseParams, PathwiseSearcher};
use crate::serial::{SearchParams, SearchStats, SerialSearcher};
use crate::store::VectorStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Serial,
    Pathwise,
    Async,
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "serial" | "bfis" => Ok(Self::Serial),
            "pathwise" | "path-wise" => Ok(Self::Pathwise),
            "async" => Ok(Self::Async),
            other => Err(Error::usage(format!("unknown engine '{other}' (serial, pathwise, async)"))),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Serial => "serial",
            Self::Pathwise => "pathwise",
            Self::Async => "async",
        })
    }
}

/// Async-engine ablation knobs. Unset group/calculator counts are derived
/// from each cell's intra-query thread budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsyncKnobs {
    pub groups: Option<usize>,
    pub discal: Option<usize>,
    pub stealing: bool,
    pub inline_fraction: f32,
    pub balancer: bool,
}

impl Default for AsyncKnobs {
    fn default() -> Self {
        Self {
            groups: None,
            discal: None,
            stealing: true,
            inline_fraction: 0.0,
            balancer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub engine: EngineKind,
    /// (intra, inter) cells.
    pub grid: Vec<(usize, usize)>,
    pub search: SearchParams,
    pub width: usize,
    pub knobs: AsyncKnobs,
    pub repetitions: usize,
    pub warmup: bool,
    /// Compare every query's expansions against a serial reference.
    pub measure_rr: bool,
    pub recall_target: Option<f64>,
}

impl SuiteConfig {
    pub fn new(engine: EngineKind, grid: Vec<(usize, usize)>, search: SearchParams) -> Self {
        Self {
            engine,
            grid,
            search,
            width: 4,
            knobs: AsyncKnobs::default(),
            repetitions: 1,
            warmup: true,
            measure_rr: true,
            recall_target: None,
        }
    }

    /// Engine parameters for a cell with `intra` threads per query.
    pub fn engine_for(&self, intra: usize) -> Result<Engine> {
        let engine = match self.engine {
            EngineKind::Serial => {
                if intra != 1 {
                    return Err(Error::usage(format!("serial engine runs 1 thread per query, grid asks for {intra}")));
                }
                Engine::Serial(self.search)
            }
            EngineKind::Pathwise => Engine::Pathwise(PathwiseParams::new(intra, self.width, self.search)),
            EngineKind::Async => {
                let k = self.knobs;
                let budget = intra.saturating_sub(usize::from(k.balancer)).max(1);
                let mut p = match (k.groups, k.discal) {
                    (Some(g), Some(c)) => AsyncParams::new(g, c, self.search),
                    (Some(g), None) => AsyncParams::new(g, (budget / g.max(1)).saturating_sub(1), self.search),
                    (None, Some(c)) => AsyncParams::new((budget / (c + 1)).max(1), c, self.search),
                    (None, None) => AsyncParams::for_threads(budget, self.search),
                };
                p = p
                    .with_stealing(k.stealing)
                    .with_inline(k.inline_fraction)
                    .with_balancer(k.balancer);
                Engine::Async(p)
            }
        };
        engine.validate()?;
        Ok(engine)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::usage("configuration grid is empty"));
        }
        if self.grid.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::usage("grid cells need intra >= 1 and inter >= 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::usage("repetitions must be >= 1"));
        }
        for &(intra, _) in &self.grid {
            self.engine_for(intra)?;
        }
        Ok(())
    }
}

/// Parses `"1x8,2x4,4x2"` into (intra, inter) cells.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>> {
    let cells: Result<Vec<_>> = s
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (a, b) = cell
                .split_once(['x', 'X', '*'])
                .ok_or_else(|| Error::usage(format!("grid cell '{cell}' is not INTRAxINTER")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::usage(format!("grid cell '{cell}' is not INTRAxINTER")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect();
    let cells = cells?;
    if cells.is_empty() {
        return Err(Error::usage("configuration grid is empty"));
    }
    Ok(cells)
}

/// Fully resolved engine parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    Serial(SearchParams),
    Pathwise(PathwiseParams),
    Async(AsyncParams),
}

impl Engine {
    pub fn validate(&self) -> Result<()> {
        match self {
            Engine::Serial(p) => p.validate(),
            Engine::Pathwise(p) => p.validate(),
            Engine::Async(p) => p.validate(),
        }
    }

    pub fn threads_per_query(&self) -> usize {
        match self {
            Engine::Serial(_) => 1,
            Engine::Pathwise(p) => p.threads,
            Engine::Async(p) => p.threads_per_query(),
        }
    }

    fn label(&self, intra: usize, inter: usize) -> ConfigLabel {
        let search = match self {
            Engine::Serial(p) => *p,
            Engine::Pathwise(p) => p.search,
            Engine::Async(p) => p.search,
        };
        let mut label = ConfigLabel {
            engine: String::new(),
            intra,
            inter,
            l: search.l,
            k: search.k,
            threads_per_query: self.threads_per_query(),
            width: None,
            groups: None,
            discal: None,
            stealing: None,
            inline_fraction: None,
            balancer: None,
        };
        match self {
            Engine::Serial(_) => label.engine = EngineKind::Serial.to_string(),
            Engine::Pathwise(p) => {
                label.engine = EngineKind::Pathwise.to_string();
                label.width = Some(p.width);
            }
            Engine::Async(p) => {
                label.engine = EngineKind::Async.to_string();
                label.groups = Some(p.groups);
                label.discal = Some(p.discal_per_group);
                label.stealing = Some(p.enable_stealing);
                label.inline_fraction = Some(p.inline_fraction);
                label.balancer = Some(p.dedicated_balancer);
            }
        }
        label
    }
}

/// What one engine run yields, engine-independent.
#[derive(Debug, Clone)]
pub struct QueryRun {
    pub ids: Vec<u32>,
    /// Every expansion across threads.
    pub expanded: Vec<u32>,
    pub stats: SearchStats,
    pub times: Vec<ThreadTimes>,
    pub violations: Vec<String>,
}

/// Per-thread reusable searcher for any engine.
#[derive(Debug)]
pub enum Worker {
    Serial(SerialSearcher, SearchParams),
    Pathwise(PathwiseSearcher, PathwiseParams),
    Async(AsyncSearcher, AsyncParams),
}

impl Worker {
    pub fn new(engine: Engine, vertex_count: usize) -> Self {
        match engine {
            Engine::Serial(p) => Worker::Serial(SerialSearcher::new(vertex_count), p),
            Engine::Pathwise(p) => Worker::Pathwise(PathwiseSearcher::new(vertex_count), p),
            Engine::Async(p) => Worker::Async(AsyncSearcher::new(vertex_count), p),
        }
    }

    pub fn run(&mut self, query: &[f32], graph: &GraphIndex, store: &VectorStore) -> Result<QueryRun> {
        match self {
            Worker::Serial(s, p) => {
                let start = Instant::now();
                let out = s.search(query, graph, store, p)?;
                let ns = start.elapsed().as_nanos() as u64;
                // the serial engine is all useful expansion work
                let times = ThreadTimes {
                    expansions: vec![(out.trace.0.first().map_or(u32::MAX, |n| n.id), ns)],
                    total_ns: ns,
                    ..ThreadTimes::default()
                };
                Ok(QueryRun {
                    ids: out.ids(),
                    expanded: out.trace.ids(),
                    stats: out.stats,
                    times: vec![times],
                    violations: Vec::new(),
                })
            }
            Worker::Pathwise(s, p) => {
                let out = s.search(query, graph, store, p)?;
                Ok(QueryRun {
                    ids: out.ids(),
                    expanded: out.merged_trace().ids(),
                    stats: out.stats,
                    times: out.times,
                    violations: Vec::new(),
                })
            }
            Worker::Async(s, p) => {
                let out = s.search(query, graph, store, p)?;
                Ok(QueryRun {
                    ids: out.ids(),
                    expanded: out.merged_trace().ids(),
                    stats: out.stats,
                    times: out.times,
                    violations: out.violations,
                })
            }
        }
    }
}

/// Inputs shared by every configuration of a suite.
#[derive(Debug, Clone, Copy)]
pub struct Workload<'a> {
    pub store: &'a VectorStore,
    pub graph: &'a GraphIndex,
    pub queries: &'a VectorStore,
    pub truth: Option<&'a GroundTruth>,
}

/// Serial expansion sets keyed by L, computed once per workload.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    by_l: HashMap<usize, Arc<Vec<ReferenceSet>>>,
}

impl ReferenceCache {
    pub fn get(&mut self, w: &Workload<'_>, l: usize) -> Result<Arc<Vec<ReferenceSet>>> {
        if let Some(r) = self.by_l.get(&l) {
            return Ok(r.clone());
        }
        let params = SearchParams::new(l, 1);
        let mut s = SerialSearcher::new(w.graph.vertex_count());
        let sets: Result<Vec<_>> = w
            .queries
            .rows()
            .map(|q| Ok(ReferenceSet::new(s.search(q, w.graph, w.store, &params)?.trace.ids())))
            .collect();
        let sets = Arc::new(sets?);
        self.by_l.insert(l, sets.clone());
        Ok(sets)
    }
}

struct Pass {
    wall_ns: u64,
    runs: Vec<(u64, QueryRun)>,
}

/// Runs every query once with `inter` concurrent workers pulling query
/// indices from a shared counter; results are stored by query index.
fn timed_pass(engine: Engine, inter: usize, w: &Workload<'_>) -> Result<Pass> {
    let n = w.queries.len();
    let next = AtomicUsize::new(0);
    let start = Instant::now();
    let per_worker: Vec<Result<Vec<(usize, u64, QueryRun)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..inter)
            .map(|_| {
                let next = &next;
                scope.spawn(move || {
                    let mut worker = Worker::new(engine, w.graph.vertex_count());
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        let t = Instant::now();
                        let run = worker.run(w.queries.vector(i as u32), w.graph, w.store)?;
                        out.push((i, t.elapsed().as_nanos() as u64, run));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let wall_ns = start.elapsed().as_nanos() as u64;
    let mut slots: Vec<Option<(u64, QueryRun)>> = (0..n).map(|_| None).collect();
    for r in per_worker {
        for (i, ns, run) in r? {
            slots[i] = Some((ns, run));
        }
    }
    Ok(Pass {
        wall_ns,
        runs: slots.into_iter().map(|s| s.expect("every query ran")).collect(),
    })
}

/// Warmup pass, then `repetitions` timed passes per grid cell; one report
/// per cell, in grid order.
pub fn run_suite(config: &SuiteConfig, w: &Workload<'_>, cache: &mut ReferenceCache) -> Result<Vec<SearchReport>> {
    config.validate()?;
    if w.queries.dim() != w.store.dim() {
        return Err(Error::usage(format!(
            "query dimension {} differs from base dimension {}",
            w.queries.dim(),
            w.store.dim()
        )));
    }
    if let Some(t) = w.truth {
        if t.len() != w.queries.len() {
            return Err(Error::usage(format!("{} ground-truth rows for {} queries", t.len(), w.queries.len())));
        }
        if t.k() < config.search.k {
            return Err(Error::usage(format!("ground truth has {} neighbors, K is {}", t.k(), config.search.k)));
        }
    }
    let reference = if config.measure_rr {
        Some(cache.get(w, config.search.l)?)
    } else {
        None
    };
    let mut reports = Vec::with_capacity(config.grid.len());
    for &(intra, inter) in &config.grid {
        let engine = config.engine_for(intra)?;
        if config.warmup {
            timed_pass(engine, inter, w)?;
        }
        let mut passes = Vec::with_capacity(config.repetitions);
        for _ in 0..config.repetitions {
            let pass = timed_pass(engine, inter, w)?;
            if config.search.debug_invariants {
                for (i, (_, run)) in pass.runs.iter().enumerate() {
                    if let Some(v) = run.violations.first() {
                        return Err(Error::Invariant(format!("query {i}: {v}")));
                    }
                }
            }
            passes.push(pass);
        }
        let mut report = summarize(engine.label(intra, inter), &passes, w, reference.as_deref().map(Vec::as_slice), config.search.k)?;
        if let (Some(target), Some(recall)) = (config.recall_target, report.aggregate.recall) {
            report.aggregate.target_missed = recall < target;
        }
        reports.push(report);
    }
    Ok(reports)
}

fn summarize(
    label: ConfigLabel,
    passes: &[Pass],
    w: &Workload<'_>,
    reference: Option<&[ReferenceSet]>,
    k: usize,
) -> Result<SearchReport> {
    let n = w.queries.len();
    let reps = passes.len() as f64;
    let first = &passes[0];
    let mut per_query = Vec::with_capacity(n);
    let mut total = Breakdown::default();
    let (mut bytes, mut recall_sum, mut rr_sum) = (0u64, 0.0, 0.0);
    for q in 0..n {
        let latency_ns = (passes.iter().map(|p| p.runs[q].0 as f64).sum::<f64>() / reps).round() as u64;
        let run = &first.runs[q].1;
        let recall = w.truth.map_or(0.0, |t| query_recall(&run.ids, &t.ids(q), k));
        let (redundant, rr, breakdown) = match reference {
            Some(r) => {
                let (_, red) = expansion_counts(&run.expanded, &r[q]);
                let rr = if run.expanded.is_empty() {
                    0.0
                } else {
                    red as f64 / run.expanded.len() as f64
                };
                (red, rr, Breakdown::classify(&run.times, &r[q]))
            }
            None => (0, 0.0, Breakdown::classify(&run.times, &ReferenceSet::new(run.expanded.iter().copied()))),
        };
        total.add(&breakdown);
        bytes += run.stats.bytes_touched;
        recall_sum += recall;
        rr_sum += rr;
        per_query.push(QueryRecord {
            latency_ns,
            ids: run.ids.clone(),
            expansions: run.expanded.len() as u64,
            redundant_expansions: redundant,
            dist_evals: run.stats.dist_evals,
            bytes_touched: run.stats.bytes_touched,
            recall,
            rr,
            breakdown,
        });
    }

    let nf = n.max(1) as f64;
    let mean_wall_ns = passes.iter().map(|p| p.wall_ns as f64).sum::<f64>() / reps;
    let lat_us: Vec<f64> = per_query.iter().map(|r| r.latency_ns as f64 / 1e3).collect();
    let pass_means: Vec<f64> = passes
        .iter()
        .map(|p| p.runs.iter().map(|r| r.0 as f64 / 1e3).sum::<f64>() / nf)
        .collect();
    let grand = pass_means.iter().sum::<f64>() / reps;
    let stddev = (pass_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / reps).sqrt();
    let rr = rr_sum / nf;
    let bw = effective_bandwidth(bytes, first.wall_ns.max(1), rr)?;
    let aggregate = Aggregate {
        queries: n,
        passes: passes.len(),
        qps: nf / (mean_wall_ns / 1e9),
        mean_latency_us: lat_us.iter().sum::<f64>() / nf,
        p50_latency_us: percentile(&lat_us, 50.0),
        p99_latency_us: percentile(&lat_us, 99.0),
        latency_pass_stddev_us: stddev,
        recall: w.truth.map(|_| recall_sum / nf),
        rr,
        logical_bandwidth_gbs: bw.logical_pmb_gbs,
        effective_bandwidth_gbs: bw.emb_gbs,
        breakdown: total.fractions(),
        thread_seconds_per_second: total.thread_ns as f64 / first.wall_ns.max(1) as f64,
        wall_seconds: mean_wall_ns / 1e9,
        target_missed: false,
    };
    Ok(SearchReport {
        config: label,
        aggregate,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build_desk_index, BuildParams};
    use crate::distance::Metric;
    use crate::groundtruth::brute_force_topk;
    use crate::synth::MixtureSpec;

    fn workload_parts() -> (VectorStore, GraphIndex, VectorStore, GroundTruth) {
        let spec = MixtureSpec::new(8, 3);
        let store = VectorStore::new(spec.sample(500, 1), 8, Metric::L2Squared).unwrap();
        let graph = build_desk_index(
            &store,
            &BuildParams {
                max_degree: 12,
                build_beam: 24,
                ..BuildParams::default()
            },
        )
        .unwrap();
        let queries = VectorStore::new(spec.sample(30, 2), 8, Metric::L2Squared).unwrap();
        let gt = brute_force_topk(&store, &queries, 10).unwrap();
        (store, graph, queries, gt)
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1x8,2x4, 4x2").unwrap(), vec![(1, 8), (2, 4), (4, 2)]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("3").is_err());
        assert!(parse_grid("ax2").is_err());
    }

    #[test]
    fn one_report_per_cell() {
        let (store, graph, queries, gt) = workload_parts();
        let w = Workload {
            store: &store,
            graph: &graph,
            queries: &queries,
            truth: Some(&gt),
        };
        let mut cache = ReferenceCache::default();
        let mut cfg = SuiteConfig::new(EngineKind::Async, parse_grid("1x4,2x2,4x1").unwrap(), SearchParams::new(32, 10));
        cfg.repetitions = 3;
        let reports = run_suite(&cfg, &w, &mut cache).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            let a = &r.aggregate;
            assert_eq!(a.passes, 3);
            assert!((0.0..=1.0).contains(&a.rr));
            assert!(a.recall.unwrap() > 0.8);
            assert!((a.breakdown.sum() - 1.0).abs() <= 0.05, "{:?}", a.breakdown);
            for q in &r.per_query {
                assert!(q.redundant_expansions <= q.expansions);
            }
        }
    }

    #[test]
    fn serial_rr_is_zero_and_recall_matches_oracle() {
        let (store, graph, queries, gt) = workload_parts();
        let w = Workload {
            store: &store,
            graph: &graph,
            queries: &queries,
            truth: Some(&gt),
        };
        let cfg = SuiteConfig::new(EngineKind::Serial, vec![(1, 1)], SearchParams::new(64, 10));
        let r = &run_suite(&cfg, &w, &mut ReferenceCache::default()).unwrap()[0];
        assert_eq!(r.aggregate.rr, 0.0);
        let mut searcher = SerialSearcher::new(graph.vertex_count());
        let mut hits = 0.0;
        for (q, row) in queries.rows().enumerate() {
            let ids = searcher.search(row, &graph, &store, &SearchParams::new(64, 10)).unwrap().ids();
            hits += ids.iter().filter(|v| gt.ids(q).contains(v)).count() as f64 / 10.0;
        }
        assert!((r.aggregate.recall.unwrap() - hits / queries.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn empty_grid_and_serial_intra_are_usage_errors() {
        let mut cfg = SuiteConfig::new(EngineKind::Serial, vec![], SearchParams::new(10, 5));
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        cfg.grid = vec![(2, 1)];
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
    }
}
