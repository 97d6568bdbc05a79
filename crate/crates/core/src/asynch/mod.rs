//! Fully asynchronous intra-query parallel search.
//!
//! A query is served by `groups` thread groups. Each group owns one
//! sub-queue, written only by its *maintainer*, and `discal_per_group`
//! *distance calculators* that speculatively compute neighbor distances
//! for the unchecked candidates they see in the group's published view. A
//! *balancer* (a dedicated thread, or folded into the maintainers)
//! estimates a global L-threshold from view snapshots, which maintainers
//! use to prune. Overloaded maintainers offload tail candidates into a
//! global buffer that underloaded ones adopt from.
//!
//! No role ever waits at a barrier. Everything crosses threads through the
//! [`DistanceBoard`], the [`LThreshold`], the [`GlobalBuffer`] and the
//! [`SubQueueView`]s. With one group, no calculators and no dedicated
//! balancer the engine performs exactly the serial best-first search.

mod board;
mod buffer;
mod calculator;
mod maintainer;
mod termination;
mod threshold;
mod view;

use std::collections::HashSet;
use std::sync::Mutex;
use std::time::Instant;

use crossbeam_utils::Backoff;
use serde::{Deserialize, Serialize};

pub use board::{Claim, DistanceBoard};
pub use buffer::GlobalBuffer;
pub use calculator::{CalcStep, Calculator, CalculatorResult};
pub use maintainer::{Maintainer, MaintainerResult, MaintainerStep};
pub use termination::Termination;
pub use threshold::{estimate_l_threshold, LThreshold};
pub use view::{Snapshot, SubQueueView};

use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::metrics::ThreadTimes;
use crate::neighbor::Neighbor;
use crate::queue::{Candidate, CandidateQueue};
use crate::serial::{ExpansionTrace, SearchParams, SearchStats};
use crate::store::VectorStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsyncParams {
    pub groups: usize,
    pub discal_per_group: usize,
    pub dedicated_balancer: bool,
    /// Share of missing neighbor distances a maintainer computes itself
    /// right away instead of first leaving them to its calculators.
    pub inline_fraction: f32,
    pub enable_stealing: bool,
    /// Maintainer iterations between threshold refreshes when there is no
    /// dedicated balancer.
    pub balancer_period: usize,
    /// Offload when own backlog exceeds this multiple of the mean.
    pub steal_high: f32,
    /// Adopt when own backlog is below this multiple of the mean.
    pub steal_low: f32,
    pub search: SearchParams,
}

impl AsyncParams {
    pub fn new(groups: usize, discal_per_group: usize, search: SearchParams) -> Self {
        Self {
            groups,
            discal_per_group,
            dedicated_balancer: false,
            inline_fraction: 0.0,
            enable_stealing: true,
            balancer_period: 4,
            steal_high: 1.25,
            steal_low: 0.75,
            search,
        }
    }

    /// Layout for a budget of `threads` per query: groups of one maintainer
    /// and up to three calculators.
    pub fn for_threads(threads: usize, search: SearchParams) -> Self {
        let threads = threads.max(1);
        let groups = (threads / 4).max(1);
        Self::new(groups, threads / groups - 1, search)
    }

    pub fn with_balancer(mut self, dedicated: bool) -> Self {
        self.dedicated_balancer = dedicated;
        self
    }

    pub fn with_stealing(mut self, on: bool) -> Self {
        self.enable_stealing = on;
        self
    }

    pub fn with_inline(mut self, fraction: f32) -> Self {
        self.inline_fraction = fraction;
        self
    }

    pub fn threads_per_query(&self) -> usize {
        self.groups * (1 + self.discal_per_group) + usize::from(self.dedicated_balancer)
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.groups == 0 {
            return Err(Error::usage("groups must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.inline_fraction) {
            return Err(Error::usage("inline fraction must lie in [0, 1]"));
        }
        if self.balancer_period == 0 {
            return Err(Error::usage("balancer period must be >= 1"));
        }
        if !(self.steal_high >= 1.0 && self.steal_low > 0.0 && self.steal_low <= 1.0) {
            return Err(Error::usage("stealing watermarks must satisfy low in (0, 1], high >= 1"));
        }
        Ok(())
    }
}

/// Distance-work counters of one role thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounters {
    /// Distances this thread computed after winning the claim.
    pub computed: u64,
    /// Distances read back from the board.
    pub reused: u64,
    /// Times a maintainer had to wait for a calculator's in-flight claim.
    pub waited: u64,
    /// Vertices whose out-edges a calculator finished scanning.
    pub scanned: u64,
    pub offloaded: u64,
    pub adopted: u64,
    /// Seqlock read retries.
    pub view_retries: u64,
}

impl RoleCounters {
    pub fn add(&mut self, o: &RoleCounters) {
        self.computed += o.computed;
        self.reused += o.reused;
        self.waited += o.waited;
        self.scanned += o.scanned;
        self.offloaded += o.offloaded;
        self.adopted += o.adopted;
        self.view_retries += o.view_retries;
    }
}

/// Shared state of one in-flight query.
pub struct QueryState<'a> {
    pub graph: &'a GraphIndex,
    pub store: &'a VectorStore,
    pub query: &'a [f32],
    pub params: AsyncParams,
    pub board: &'a DistanceBoard,
    pub threshold: LThreshold,
    pub buffer: GlobalBuffer,
    pub views: Vec<SubQueueView>,
    pub termination: Termination,
    violations: Mutex<Vec<String>>,
}

impl<'a> QueryState<'a> {
    /// Sets up a query: the board must already be reset. Entry nodes are
    /// claimed, measured and dealt round-robin to the groups; the returned
    /// lists seed each group's maintainer.
    pub fn new(
        query: &'a [f32],
        graph: &'a GraphIndex,
        store: &'a VectorStore,
        board: &'a DistanceBoard,
        params: AsyncParams,
    ) -> (Self, Vec<Vec<Candidate>>, SearchStats) {
        let g = params.groups;
        let mut seeds = vec![Vec::new(); g];
        let mut stats = SearchStats::default();
        let mut dealt = 0;
        for &e in graph.entry_nodes() {
            if board.mark_visited(e) {
                let d = match board.claim_or_read(e, || store.distance_to(query, e)) {
                    Claim::Computed(d) => {
                        stats.note_distance(store);
                        d
                    }
                    other => other.distance().unwrap_or_else(|| board.wait_ready(e)),
                };
                seeds[dealt % g].push(Candidate::unchecked(e, d));
                dealt += 1;
            }
        }
        let capacity = params.search.l.max(seeds.iter().map(Vec::len).max().unwrap_or(0));
        let state = Self {
            graph,
            store,
            query,
            params,
            board,
            threshold: LThreshold::default(),
            buffer: GlobalBuffer::default(),
            views: (0..g).map(|_| SubQueueView::new(capacity)).collect(),
            termination: Termination::default(),
            violations: Mutex::new(Vec::new()),
        };
        state.termination.added(dealt);
        (state, seeds, stats)
    }

    pub(crate) fn report_violation(&self, what: String) {
        self.violations.lock().unwrap().push(what);
        self.termination.abort();
    }

    pub fn violations(&self) -> Vec<String> {
        self.violations.lock().unwrap().clone()
    }
}

/// Reusable threshold-estimation scratch shared by the balancer roles.
#[derive(Debug, Default)]
pub(crate) struct BalancerScratch {
    snap: Snapshot,
    seqs: Vec<Vec<f32>>,
    seen: HashSet<u32>,
    retries: u64,
}

impl BalancerScratch {
    /// Threshold estimate over all groups' views; `own` substitutes the
    /// caller's live queue for its (older) published view. Vertices seen in
    /// two views (mid-transfer through the buffer) are counted once.
    pub(crate) fn estimate(&mut self, state: &QueryState<'_>, own: Option<(usize, &CandidateQueue)>) -> f32 {
        let g = state.views.len();
        self.seqs.resize_with(g, Vec::new);
        self.seen.clear();
        for (i, view) in state.views.iter().enumerate() {
            let entries: &[Candidate] = match own {
                Some((og, q)) if og == i => q.entries(),
                _ => {
                    self.retries += view.read_into(&mut self.snap) as u64;
                    &self.snap.entries
                }
            };
            let seq = &mut self.seqs[i];
            seq.clear();
            for c in entries {
                if g == 1 || self.seen.insert(c.id) {
                    seq.push(c.dist);
                }
            }
        }
        estimate_l_threshold(&self.seqs, state.params.search.l)
    }
}

/// Dedicated balancer: refresh the threshold until the query ends.
pub fn balancer_loop(state: &QueryState<'_>) -> ThreadTimes {
    let start = Instant::now();
    let mut scratch = BalancerScratch::default();
    let backoff = Backoff::new();
    let mut times = ThreadTimes::default();
    while !state.termination.ended() {
        let t = scratch.estimate(state, None);
        state.threshold.publish(t);
        backoff.snooze();
        if backoff.is_completed() {
            std::thread::yield_now();
        }
    }
    times.total_ns = start.elapsed().as_nanos() as u64;
    times.serial_ns = times.total_ns;
    times
}

#[derive(Debug, Clone)]
pub struct AsyncOutcome {
    pub results: Vec<Neighbor>,
    /// Expansions per group, in the order each maintainer performed them.
    pub group_traces: Vec<ExpansionTrace>,
    /// Calculator scan order per calculator thread.
    pub calculator_scans: Vec<Vec<u32>>,
    pub times: Vec<ThreadTimes>,
    pub stats: SearchStats,
    pub maintainer_counters: RoleCounters,
    pub calculator_counters: RoleCounters,
    /// Distinct claimed vertices (board audit, debug mode only).
    pub claimed_vertices: Option<usize>,
    pub violations: Vec<String>,
    pub short: bool,
}

impl AsyncOutcome {
    pub fn ids(&self) -> Vec<u32> {
        self.results.iter().map(|n| n.id).collect()
    }

    pub fn merged_trace(&self) -> ExpansionTrace {
        ExpansionTrace(self.group_traces.iter().flat_map(|t| t.0.iter().copied()).collect())
    }
}

/// Per-worker reusable state (the distance board).
#[derive(Debug)]
pub struct AsyncSearcher {
    board: DistanceBoard,
}

impl AsyncSearcher {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            board: DistanceBoard::new(vertex_count),
        }
    }

    pub fn search(
        &mut self,
        query: &[f32],
        graph: &GraphIndex,
        store: &VectorStore,
        params: &AsyncParams,
    ) -> Result<AsyncOutcome> {
        params.validate()?;
        if self.board.len() != graph.vertex_count() {
            self.board = DistanceBoard::new(graph.vertex_count());
        }
        self.board.reset();
        let (state, seeds, setup_stats) = QueryState::new(query, graph, store, &self.board, *params);
        let state = &state;
        let mut seeds = seeds.into_iter();
        let first = seeds.next().unwrap();

        let (m0, others, calcs, balancer) = std::thread::scope(|scope| {
            let others: Vec<_> = seeds
                .enumerate()
                .map(|(i, seed)| scope.spawn(move || Maintainer::new(state, i + 1, seed).run()))
                .collect();
            let calcs: Vec<_> = (0..params.groups)
                .flat_map(|g| (0..params.discal_per_group).map(move |c| (g, c)))
                .map(|(g, c)| scope.spawn(move || Calculator::new(state, g, c).run()))
                .collect();
            let balancer = params
                .dedicated_balancer
                .then(|| scope.spawn(move || balancer_loop(state)));
            let m0 = Maintainer::new(state, 0, first).run();
            let others: Vec<_> = others.into_iter().map(|h| h.join().unwrap()).collect();
            let calcs: Vec<_> = calcs.into_iter().map(|h| h.join().unwrap()).collect();
            let balancer = balancer.map(|h| h.join().unwrap());
            (m0, others, calcs, balancer)
        });

        // join: merge sub-queues
        let merge_start = Instant::now();
        let mut stats = setup_stats;
        let mut maintainer_counters = RoleCounters::default();
        let mut calculator_counters = RoleCounters::default();
        let mut group_traces = Vec::with_capacity(params.groups);
        let mut times = Vec::new();
        let mut merged: Vec<Candidate> = Vec::new();
        for m in std::iter::once(m0).chain(others) {
            stats.add(&m.stats);
            maintainer_counters.add(&m.counters);
            group_traces.push(m.trace);
            times.push(m.times);
            merged.extend(m.entries);
        }
        let mut calculator_scans = Vec::with_capacity(calcs.len());
        for c in calcs {
            stats.add(&c.stats);
            calculator_counters.add(&c.counters);
            calculator_scans.push(c.scans);
            times.push(c.times);
        }
        if let Some(b) = balancer {
            times.push(b);
        }
        merged.sort_unstable_by(|a, b| crate::neighbor::cmp_dist_id(a.dist, a.id, b.dist, b.id));

        let mut violations = state.violations();
        let mut claimed_vertices = None;
        if params.search.debug_invariants {
            let mut ids: Vec<u32> = merged.iter().map(|c| c.id).collect();
            ids.sort_unstable();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                violations.push(format!("ownership: vertex {} held by two sub-queues", w[0]));
            }
            let all: ExpansionTrace = ExpansionTrace(group_traces.iter().flat_map(|t| t.0.clone()).collect());
            if all.has_duplicates() {
                violations.push("a vertex was expanded twice".into());
            }
            if !state.buffer.is_empty() {
                violations.push(format!("{} entries left in the global buffer", state.buffer.len()));
            }
            let wo = self.board.write_once_violations();
            if wo > 0 {
                violations.push(format!("{wo} write-once violations on the distance board"));
            }
            claimed_vertices = Some(self.board.claimed_count());
        }
        let results: Vec<Neighbor> = merged.iter().take(params.search.k).map(Candidate::neighbor).collect();
        if let Some(t) = times.first_mut() {
            let merge_ns = merge_start.elapsed().as_nanos() as u64;
            t.serial_ns += merge_ns;
            t.total_ns += merge_ns;
        }
        Ok(AsyncOutcome {
            short: results.len() < params.search.k,
            results,
            group_traces,
            calculator_scans,
            times,
            stats,
            maintainer_counters,
            calculator_counters,
            claimed_vertices,
            violations,
        })
    }
}

pub fn async_search(query: &[f32], graph: &GraphIndex, store: &VectorStore, params: &AsyncParams) -> Result<AsyncOutcome> {
    AsyncSearcher::new(graph.vertex_count()).search(query, graph, store, params)
}
