//! Fork-join path-wise parallel search.
//!
//! Each epoch the master scatters the global queue round-robin by rank into
//! `threads` local queues; every thread then expands up to `width`
//! first-unchecked candidates of its own queue without synchronizing
//! (visited flags are shared with atomic test-and-set); a barrier closes
//! the epoch and the master merges the locals back and resizes to L.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Barrier, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::metrics::{Lap, ThreadTimes};
use crate::neighbor::Neighbor;
use crate::queue::{Candidate, CandidateQueue};
use crate::serial::{ExpansionTrace, SearchParams, SearchStats};
use crate::store::VectorStore;
use crate::visit::AtomicVisitSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwiseParams {
    pub threads: usize,
    pub width: usize,
    pub search: SearchParams,
}

impl PathwiseParams {
    pub fn new(threads: usize, width: usize, search: SearchParams) -> Self {
        Self { threads, width, search }
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.threads == 0 || self.width == 0 {
            return Err(Error::usage("path-wise threads and width must be >= 1"));
        }
        Ok(())
    }
}

/// Raw per-thread time accounting for one query. Expansion time is kept
/// per vertex so it can later be split into useful and redundant work
/// against a serial reference trace.
#[derive(Debug, Clone)]
pub struct PathwiseOutcome {
    pub results: Vec<Neighbor>,
    pub thread_traces: Vec<ExpansionTrace>,
    pub times: Vec<ThreadTimes>,
    pub stats: SearchStats,
    pub epochs: usize,
    pub short: bool,
}

impl PathwiseOutcome {
    pub fn ids(&self) -> Vec<u32> {
        self.results.iter().map(|n| n.id).collect()
    }

    /// All expansions across threads (thread-major order).
    pub fn merged_trace(&self) -> ExpansionTrace {
        ExpansionTrace(self.thread_traces.iter().flat_map(|t| t.0.iter().copied()).collect())
    }
}

struct Shared<'a> {
    graph: &'a GraphIndex,
    store: &'a VectorStore,
    query: &'a [f32],
    params: PathwiseParams,
    visits: &'a AtomicVisitSet,
    slots: Vec<Mutex<Vec<Candidate>>>,
    barrier: Barrier,
    done: AtomicBool,
}

struct WorkerResult {
    trace: ExpansionTrace,
    times: ThreadTimes,
    stats: SearchStats,
}

impl Shared<'_> {
    /// Fork phase for one thread: expand up to `width` candidates.
    fn fork(&self, tid: usize, lap: &mut Lap, out: &mut WorkerResult, scratch: &mut Vec<Neighbor>) {
        let entries = std::mem::take(&mut *self.slots[tid].lock().unwrap());
        let mut local = CandidateQueue::new(self.params.search.l);
        for c in entries {
            local.insert(c);
        }
        out.times.sync_ns += lap.take();
        let mut done = 0;
        while done < self.params.width {
            let Some(i) = local.first_unchecked() else { break };
            let v = local.entries()[i];
            local.mark_checked(i);
            scratch.clear();
            let nbrs = self.graph.neighbors(v.id);
            out.stats.note_scan(nbrs.len());
            for &u in nbrs {
                if self.visits.test_and_set(u) {
                    scratch.push(Neighbor::new(u, self.store.distance_to(self.query, u)));
                    out.stats.note_distance(self.store);
                }
            }
            local.merge(scratch);
            if local.len() > self.params.search.l {
                local.resize();
            }
            out.stats.expansions += 1;
            out.trace.push(v.neighbor());
            out.times.expansions.push((v.id, lap.take()));
            done += 1;
        }
        *self.slots[tid].lock().unwrap() = local.entries().to_vec();
        out.times.sync_ns += lap.take();
    }

    fn worker(&self, tid: usize) -> WorkerResult {
        let start = Instant::now();
        let mut lap = Lap(start);
        let mut out = WorkerResult {
            trace: ExpansionTrace::default(),
            times: ThreadTimes::default(),
            stats: SearchStats::default(),
        };
        let mut scratch = Vec::new();
        loop {
            self.barrier.wait();
            out.times.sync_ns += lap.take();
            if self.done.load(Ordering::Acquire) {
                break;
            }
            self.fork(tid, &mut lap, &mut out, &mut scratch);
            self.barrier.wait();
            out.times.sync_ns += lap.take();
        }
        out.times.total_ns = start.elapsed().as_nanos() as u64;
        out
    }
}

/// Reusable path-wise search state (shared visited flags).
#[derive(Debug)]
pub struct PathwiseSearcher {
    visits: AtomicVisitSet,
}

impl PathwiseSearcher {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            visits: AtomicVisitSet::new(vertex_count),
        }
    }

    pub fn search(
        &mut self,
        query: &[f32],
        graph: &GraphIndex,
        store: &VectorStore,
        params: &PathwiseParams,
    ) -> Result<PathwiseOutcome> {
        params.validate()?;
        if self.visits.capacity() != graph.vertex_count() {
            self.visits = AtomicVisitSet::new(graph.vertex_count());
        }
        self.visits.reset();
        let t = params.threads;
        let l = params.search.l;
        let shared = Shared {
            graph,
            store,
            query,
            params: *params,
            visits: &self.visits,
            slots: (0..t).map(|_| Mutex::new(Vec::new())).collect(),
            barrier: Barrier::new(t),
            done: AtomicBool::new(false),
        };

        let start = Instant::now();
        let mut lap = Lap(start);
        let mut master = WorkerResult {
            trace: ExpansionTrace::default(),
            times: ThreadTimes::default(),
            stats: SearchStats::default(),
        };
        let mut global = CandidateQueue::new(l);
        for &e in graph.entry_nodes() {
            if self.visits.test_and_set(e) {
                global.insert(Candidate::unchecked(e, store.distance_to(query, e)));
                master.stats.note_distance(store);
            }
        }
        let mut epochs = 0;
        let mut violation = None;

        let helpers = std::thread::scope(|scope| {
            let handles: Vec<_> = (1..t)
                .map(|tid| {
                    let shared = &shared;
                    scope.spawn(move || shared.worker(tid))
                })
                .collect();
            let mut scratch = Vec::new();
            loop {
                // join phase: merge locals, resize, scatter
                if epochs > 0 {
                    let mut all = Vec::new();
                    for slot in &shared.slots {
                        all.append(&mut slot.lock().unwrap());
                    }
                    global.clear();
                    for c in all {
                        global.insert(c);
                    }
                    global.resize();
                    if params.search.debug_invariants && violation.is_none() {
                        violation = global.check_invariants(false).err();
                    }
                }
                let finished = !global.has_unchecked();
                if !finished {
                    for (rank, c) in global.entries().iter().enumerate() {
                        shared.slots[rank % t].lock().unwrap().push(*c);
                    }
                    epochs += 1;
                }
                shared.done.store(finished, Ordering::Release);
                master.times.serial_ns += lap.take();
                shared.barrier.wait();
                master.times.sync_ns += lap.take();
                if finished {
                    break;
                }
                shared.fork(0, &mut lap, &mut master, &mut scratch);
                shared.barrier.wait();
                master.times.sync_ns += lap.take();
            }
            handles.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
        });
        // helper shutdown and join
        master.times.sync_ns += lap.take();
        master.times.total_ns = start.elapsed().as_nanos() as u64;
        if let Some(v) = violation {
            return Err(Error::Invariant(v));
        }

        let mut stats = master.stats;
        let mut thread_traces = vec![master.trace];
        let mut times = vec![master.times];
        for h in helpers {
            stats.add(&h.stats);
            thread_traces.push(h.trace);
            times.push(h.times);
        }
        let results = global.top(params.search.k);
        Ok(PathwiseOutcome {
            short: results.len() < params.search.k,
            results,
            thread_traces,
            times,
            stats,
            epochs,
        })
    }
}

pub fn pathwise_search(
    query: &[f32],
    graph: &GraphIndex,
    store: &VectorStore,
    params: &PathwiseParams,
) -> Result<PathwiseOutcome> {
    PathwiseSearcher::new(graph.vertex_count()).search(query, graph, store, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serial::bfis_search;
    use crate::testgraph::*;

    #[test]
    fn two_threads_width_two() {
        let g = example_graph();
        let out = pathwise_search(&ORIGIN, &g, &redundant_store(), &PathwiseParams::new(2, 2, SearchParams::new(5, 3)))
            .unwrap();
        assert_eq!(out.thread_traces[0].ids()[..2], [1, 3]);
        assert_eq!(out.thread_traces[1].ids()[..2], [2, 6]);
    }

    #[test]
    fn width_three_expands_pruned_vertex() {
        let g = example_graph();
        let store = redundant_store();
        let sp = SearchParams::new(5, 3);
        let serial = bfis_search(&ORIGIN, &g, &store, &sp).unwrap();
        assert_eq!(serial.trace.ids(), vec![1, 2, 3, 4, 6]);
        let out = pathwise_search(&ORIGIN, &g, &store, &PathwiseParams::new(2, 3, sp)).unwrap();
        assert_eq!(out.thread_traces[0].ids()[..3], [1, 3, 4]);
        assert_eq!(out.thread_traces[1].ids()[..3], [2, 6, 10]);
        assert!(!serial.trace.ids().contains(&10));

        // width 2: 10 is computed but pruned at the first join
        let out = pathwise_search(&ORIGIN, &g, &store, &PathwiseParams::new(2, 2, sp)).unwrap();
        assert!(!out.merged_trace().ids().contains(&10));
    }

    #[test]
    fn single_thread_width_one_is_serial() {
        let g = example_graph();
        for store in [identity_store(), redundant_store()] {
            let sp = SearchParams::new(5, 3).with_debug(true);
            let serial = bfis_search(&ORIGIN, &g, &store, &sp).unwrap();
            let out = pathwise_search(&ORIGIN, &g, &store, &PathwiseParams::new(1, 1, sp)).unwrap();
            assert_eq!(out.thread_traces[0], serial.trace);
            assert_eq!(out.results, serial.results);
        }
    }

    #[test]
    fn result_vertices_were_expanded_or_entries() {
        let g = example_graph();
        let store = identity_store();
        let out = pathwise_search(&ORIGIN, &g, &store, &PathwiseParams::new(3, 2, SearchParams::new(6, 4))).unwrap();
        let expanded = out.merged_trace().ids();
        for id in out.ids() {
            assert!(expanded.contains(&id) || g.entry_nodes().contains(&id));
        }
        assert!(!out.merged_trace().has_duplicates());
    }
}
