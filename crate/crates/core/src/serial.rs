//! Best-first search over the similarity graph: the single-threaded
//! reference every parallel engine is checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::neighbor::Neighbor;
use crate::queue::{Candidate, CandidateQueue};
use crate::store::VectorStore;
use crate::visit::VisitSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Queue capacity.
    pub l: usize,
    /// Number of results.
    pub k: usize,
    /// Validate queue invariants after every step.
    #[serde(default)]
    pub debug_invariants: bool,
}

impl SearchParams {
    pub fn new(l: usize, k: usize) -> Self {
        Self {
            l,
            k,
            debug_invariants: false,
        }
    }

    pub fn with_debug(mut self, on: bool) -> Self {
        self.debug_invariants = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("K must be >= 1"));
        }
        if self.l < self.k {
            return Err(Error::usage(format!("L = {} must be >= K = {}", self.l, self.k)));
        }
        Ok(())
    }
}

/// Ordered expansions of one query (vertex plus its distance).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpansionTrace(pub Vec<Neighbor>);

impl ExpansionTrace {
    pub fn ids(&self) -> Vec<u32> {
        self.0.iter().map(|n| n.id).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, n: Neighbor) {
        self.0.push(n);
    }

    pub fn has_duplicates(&self) -> bool {
        let mut ids = self.ids();
        ids.sort_unstable();
        ids.windows(2).any(|w| w[0] == w[1])
    }
}

/// Work counters for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: u64,
    pub dist_evals: u64,
    pub bytes_touched: u64,
}

impl SearchStats {
    pub fn add(&mut self, other: &SearchStats) {
        self.expansions += other.expansions;
        self.dist_evals += other.dist_evals;
        self.bytes_touched += other.bytes_touched;
    }

    #[inline]
    pub(crate) fn note_distance(&mut self, store: &VectorStore) {
        self.dist_evals += 1;
        self.bytes_touched += store.vector_bytes();
    }

    #[inline]
    pub(crate) fn note_scan(&mut self, degree: usize) {
        self.bytes_touched += (degree * std::mem::size_of::<u32>()) as u64;
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Up to K results sorted by (distance, ID).
    pub results: Vec<Neighbor>,
    pub trace: ExpansionTrace,
    pub stats: SearchStats,
    /// Fewer than K vertices were reachable.
    pub short: bool,
}

impl SearchOutcome {
    pub fn ids(&self) -> Vec<u32> {
        self.results.iter().map(|n| n.id).collect()
    }
}

/// Expands the unchecked candidate at `index`: marks it checked, computes
/// distances to all its unvisited neighbors and merges them. Returns the
/// number of merged candidates.
pub fn expand(
    index: usize,
    query: &[f32],
    queue: &mut CandidateQueue,
    graph: &GraphIndex,
    store: &VectorStore,
    visits: &mut VisitSet,
    stats: &mut SearchStats,
    scratch: &mut Vec<Neighbor>,
) -> usize {
    let v = queue.entries()[index].id;
    debug_assert!(!queue.entries()[index].checked);
    queue.mark_checked(index);
    scratch.clear();
    let nbrs = graph.neighbors(v);
    stats.note_scan(nbrs.len());
    for &u in nbrs {
        if visits.mark(u) {
            scratch.push(Neighbor::new(u, store.distance_to(query, u)));
            stats.note_distance(store);
        }
    }
    stats.expansions += 1;
    queue.merge(scratch);
    scratch.len()
}

/// Reusable per-thread search state.
#[derive(Debug, Clone)]
pub struct SerialSearcher {
    visits: VisitSet,
    queue: CandidateQueue,
    scratch: Vec<Neighbor>,
}

impl SerialSearcher {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            visits: VisitSet::new(vertex_count),
            queue: CandidateQueue::new(0),
            scratch: Vec::new(),
        }
    }

    pub fn search(
        &mut self,
        query: &[f32],
        graph: &GraphIndex,
        store: &VectorStore,
        params: &SearchParams,
    ) -> Result<SearchOutcome> {
        params.validate()?;
        self.search_from(query, graph.entry_nodes(), graph, store, params)
    }

    /// Same as [`search`](Self::search) with an explicit entry set.
    pub fn search_from(
        &mut self,
        query: &[f32],
        entries: &[u32],
        graph: &GraphIndex,
        store: &VectorStore,
        params: &SearchParams,
    ) -> Result<SearchOutcome> {
        if self.visits.capacity() != graph.vertex_count() {
            self.visits = VisitSet::new(graph.vertex_count());
        }
        self.visits.reset();
        if self.queue.capacity() != params.l {
            self.queue = CandidateQueue::new(params.l);
        }
        self.queue.clear();
        let mut stats = SearchStats::default();
        let mut trace = ExpansionTrace::default();

        for &e in entries {
            if self.visits.mark(e) {
                self.queue.insert(Candidate::unchecked(e, store.distance_to(query, e)));
                stats.note_distance(store);
            }
        }

        while let Some(i) = self.queue.first_unchecked() {
            let c = self.queue.entries()[i];
            trace.push(c.neighbor());
            expand(
                i,
                query,
                &mut self.queue,
                graph,
                store,
                &mut self.visits,
                &mut stats,
                &mut self.scratch,
            );
            if self.queue.len() > params.l {
                self.queue.resize();
            }
            if params.debug_invariants {
                self.queue.check_invariants(false).map_err(Error::Invariant)?;
            }
        }

        let results = self.queue.top(params.k);
        Ok(SearchOutcome {
            short: results.len() < params.k,
            results,
            trace,
            stats,
        })
    }
}

/// One-shot best-first search.
pub fn bfis_search(query: &[f32], graph: &GraphIndex, store: &VectorStore, params: &SearchParams) -> Result<SearchOutcome> {
    SerialSearcher::new(graph.vertex_count()).search(query, graph, store, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgraph::*;

    #[test]
    fn example_graph_hand_trace() {
        let g = example_graph();
        let out = bfis_search(&ORIGIN, &g, &identity_store(), &SearchParams::new(5, 3).with_debug(true)).unwrap();
        assert_eq!(out.ids(), vec![1, 2, 3]);
        assert_eq!(out.trace.ids(), vec![1, 2, 3, 4, 5]);
        assert!(!out.short);
    }

    #[test]
    fn expand_merges_neighbors() {
        let g = example_graph();
        let store = identity_store();
        let mut q = CandidateQueue::new(5);
        let mut visits = VisitSet::new(g.vertex_count());
        for v in [1u32, 2, 3] {
            visits.mark(v);
            q.insert(Candidate::unchecked(v, store.distance_to(&ORIGIN, v)));
        }
        let mut stats = SearchStats::default();
        let mut scratch = Vec::new();
        let n = expand(0, &ORIGIN, &mut q, &g, &store, &mut visits, &mut stats, &mut scratch);
        assert_eq!(n, 2);
        assert_eq!(q.top_ids(5), vec![1, 2, 3, 4, 5]);
        assert!(q.entries()[0].checked);
        assert_eq!(q.entries()[3].dist, 16.0);
        assert_eq!(stats.dist_evals, 2);

        // 2's neighbors 6, 7 are computed and then cut by the resize to L = 5
        let idx = q.first_unchecked().unwrap();
        assert_eq!(q.entries()[idx].id, 2);
        assert_eq!(expand(idx, &ORIGIN, &mut q, &g, &store, &mut visits, &mut stats, &mut scratch), 2);
        assert_eq!(q.len(), 7);
        q.resize();
        assert_eq!(q.top_ids(10), vec![1, 2, 3, 4, 5]);
        assert_eq!(stats.dist_evals, 4);
    }

    #[test]
    fn expand_saturated_vertex() {
        let g = example_graph();
        let store = identity_store();
        let mut q = CandidateQueue::new(5);
        let mut visits = VisitSet::new(g.vertex_count());
        for v in [1u32, 4, 5] {
            visits.mark(v);
        }
        q.insert(Candidate::unchecked(1, 1.0));
        let before: Vec<u32> = q.top_ids(5);
        let n = expand(0, &ORIGIN, &mut q, &g, &store, &mut visits, &mut SearchStats::default(), &mut Vec::new());
        assert_eq!(n, 0);
        assert_eq!(q.top_ids(5), before);
        assert!(q.entries()[0].checked);
    }

    #[test]
    fn edgeless_graph_returns_entry() {
        let g = crate::graph::GraphIndex::from_adjacency(&vec![vec![]; 4], vec![2], 1).unwrap();
        let store = store_at(&[0.0, 1.0, 2.0, 3.0]);
        let out = bfis_search(&ORIGIN, &g, &store, &SearchParams::new(4, 1)).unwrap();
        assert_eq!(out.ids(), vec![2]);
        assert_eq!(out.trace.ids(), vec![2]);
        let out = bfis_search(&ORIGIN, &g, &store, &SearchParams::new(4, 3)).unwrap();
        assert!(out.short);
        assert_eq!(out.ids(), vec![2]);
    }

    #[test]
    fn params_validation() {
        assert!(SearchParams::new(4, 5).validate().is_err());
        assert!(SearchParams::new(4, 0).validate().is_err());
        assert!(SearchParams::new(5, 5).validate().is_ok());
    }
}
