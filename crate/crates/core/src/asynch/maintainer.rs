//! Sub-queue maintainer: the only writer of its group's queue.

use std::time::Instant;

use crossbeam_utils::Backoff;

use super::{BalancerScratch, Claim, QueryState, RoleCounters};
use crate::metrics::{Lap, ThreadTimes};
use crate::neighbor::Neighbor;
use crate::queue::{Candidate, CandidateQueue};
use crate::serial::{ExpansionTrace, SearchStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaintainerStep {
    Expanded(u32),
    /// Nothing unchecked locally, but work remains elsewhere.
    Idle,
    Ended,
}

#[derive(Debug)]
pub struct MaintainerResult {
    pub trace: ExpansionTrace,
    pub stats: SearchStats,
    pub counters: RoleCounters,
    pub times: ThreadTimes,
    /// Final sub-queue contents.
    pub entries: Vec<Candidate>,
}

pub struct Maintainer<'s, 'a> {
    state: &'s QueryState<'a>,
    group: usize,
    queue: CandidateQueue,
    iterations: u64,
    trace: ExpansionTrace,
    stats: SearchStats,
    counters: RoleCounters,
    times: ThreadTimes,
    batch: Vec<Neighbor>,
    fresh: Vec<u32>,
    adopted: Vec<Candidate>,
    scratch: BalancerScratch,
    start: Instant,
    lap: Lap,
}

impl<'s, 'a> Maintainer<'s, 'a> {
    pub fn new(state: &'s QueryState<'a>, group: usize, seeds: Vec<Candidate>) -> Self {
        let mut queue = CandidateQueue::new(state.params.search.l);
        for c in seeds {
            queue.insert(c);
        }
        state.views[group].publish(queue.entries());
        let start = Instant::now();
        Self {
            state,
            group,
            queue,
            iterations: 0,
            trace: ExpansionTrace::default(),
            stats: SearchStats::default(),
            counters: RoleCounters::default(),
            times: ThreadTimes::default(),
            batch: Vec::new(),
            fresh: Vec::new(),
            adopted: Vec::new(),
            scratch: BalancerScratch::default(),
            start,
            lap: Lap(start),
        }
    }

    pub fn queue(&self) -> &CandidateQueue {
        &self.queue
    }

    pub fn counters(&self) -> &RoleCounters {
        &self.counters
    }

    pub fn trace(&self) -> &ExpansionTrace {
        &self.trace
    }

    /// One iteration: expand the first unchecked candidate, merge, resize,
    /// prune by the global threshold, rebalance and republish.
    pub fn step(&mut self) -> MaintainerStep {
        let st = self.state;
        if st.termination.ended() {
            return MaintainerStep::Ended;
        }
        if !self.queue.has_unchecked() {
            if self.stealing() {
                self.adopt(1);
            }
            self.times.sync_ns += self.lap.take();
            if !self.queue.has_unchecked() {
                return if st.termination.terminate_query() {
                    MaintainerStep::Ended
                } else {
                    MaintainerStep::Idle
                };
            }
            self.publish();
        }

        let idx = self.queue.first_unchecked().expect("checked above");
        let Candidate { id: v, dist, .. } = self.queue.entries()[idx];
        self.queue.mark_checked(idx);
        self.trace.push(Neighbor::new(v, dist));
        self.stats.expansions += 1;
        let wait = self.gather(v);

        self.queue.merge(&self.batch);
        st.termination.added(self.batch.len());
        st.termination.retired(1);
        let mut dropped = self.queue.resize();
        self.iterations += 1;
        if !st.params.dedicated_balancer && self.iterations % st.params.balancer_period as u64 == 0 {
            let t = self.scratch.estimate(st, Some((self.group, &self.queue)));
            st.threshold.publish(t);
        }
        dropped += self.queue.prune_above(st.threshold.get());
        st.termination.retired(dropped);
        let ns = self.lap.take();
        self.times.expansions.push((v, ns.saturating_sub(wait)));
        self.times.sync_ns += wait;

        if self.stealing() {
            self.balance();
            self.times.sync_ns += self.lap.take();
        }
        self.publish();
        if st.params.search.debug_invariants {
            if let Err(e) = self.queue.check_invariants(false) {
                st.report_violation(format!("group {} queue: {e}", self.group));
            }
        }
        MaintainerStep::Expanded(v)
    }

    /// Runs to termination.
    pub fn run(mut self) -> MaintainerResult {
        let backoff = Backoff::new();
        loop {
            match self.step() {
                MaintainerStep::Expanded(_) => backoff.reset(),
                MaintainerStep::Idle => {
                    backoff.snooze();
                    if backoff.is_completed() {
                        std::thread::yield_now();
                    }
                }
                MaintainerStep::Ended => break,
            }
        }
        self.finish()
    }

    pub fn finish(mut self) -> MaintainerResult {
        self.times.sync_ns += self.lap.take();
        self.times.total_ns = self.start.elapsed().as_nanos() as u64;
        self.counters.view_retries += self.scratch.retries;
        MaintainerResult {
            trace: self.trace,
            stats: self.stats,
            counters: self.counters,
            times: self.times,
            entries: self.queue.entries().to_vec(),
        }
    }

    fn stealing(&self) -> bool {
        self.state.params.enable_stealing && self.state.params.groups > 1
    }

    fn publish(&self) {
        self.state.views[self.group].publish(self.queue.entries());
    }

    /// Collects distances of `v`'s unvisited neighbors into `batch`: reuse
    /// what calculators published, compute the inline share, wait for the
    /// rest and fall back to computing them. Returns nanoseconds spent
    /// waiting.
    fn gather(&mut self, v: u32) -> u64 {
        let st = self.state;
        let nbrs = st.graph.neighbors(v);
        self.stats.note_scan(nbrs.len());
        self.batch.clear();
        self.fresh.clear();
        for &u in nbrs {
            if st.board.mark_visited(u) {
                match st.board.read(u) {
                    Some(d) => {
                        self.counters.reused += 1;
                        self.batch.push(Neighbor::new(u, d));
                    }
                    None => self.fresh.push(u),
                }
            }
        }
        let quota = if st.params.discal_per_group == 0 {
            self.fresh.len()
        } else {
            (st.params.inline_fraction * self.fresh.len() as f32).ceil() as usize
        };
        let mut wait = 0;
        for k in 0..self.fresh.len() {
            let u = self.fresh[k];
            let d = if k < quota {
                self.claim(u, &mut wait)
            } else {
                self.await_calculators(u, &mut wait)
            };
            self.batch.push(Neighbor::new(u, d));
        }
        wait
    }

    fn claim(&mut self, u: u32, wait: &mut u64) -> f32 {
        let st = self.state;
        match st.board.claim_or_read(u, || st.store.distance_to(st.query, u)) {
            Claim::Computed(d) => {
                self.stats.note_distance(st.store);
                self.counters.computed += 1;
                d
            }
            Claim::Reused(d) => {
                self.counters.reused += 1;
                d
            }
            Claim::LostClaim => {
                let t = Instant::now();
                let d = st.board.wait_ready(u);
                *wait += t.elapsed().as_nanos() as u64;
                self.counters.waited += 1;
                d
            }
        }
    }

    fn await_calculators(&mut self, u: u32, wait: &mut u64) -> f32 {
        let board = self.state.board;
        let t = Instant::now();
        let backoff = Backoff::new();
        loop {
            if let Some(d) = board.read(u) {
                *wait += t.elapsed().as_nanos() as u64;
                self.counters.reused += 1;
                return d;
            }
            if backoff.is_completed() {
                *wait += t.elapsed().as_nanos() as u64;
                return self.claim(u, wait);
            }
            backoff.snooze();
        }
    }

    /// Pops up to `want` candidates from the global buffer, discarding any
    /// beyond the current threshold.
    fn adopt(&mut self, want: usize) {
        let st = self.state;
        self.adopted.clear();
        let n = st.buffer.pop_many(want, &mut self.adopted);
        if n == 0 {
            return;
        }
        self.counters.adopted += n as u64;
        let thr = st.threshold.get();
        let mut discarded = 0;
        for c in self.adopted.drain(..) {
            if c.dist > thr {
                discarded += 1;
            } else {
                self.queue.insert(c);
            }
        }
        discarded += self.queue.resize();
        st.termination.retired(discarded);
    }

    /// Work stealing on unchecked backlog: offload the tail when well above
    /// the mean across groups, adopt when well below.
    fn balance(&mut self) {
        let st = self.state;
        let own = self.queue.unchecked_count();
        let others: usize = st
            .views
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != self.group)
            .map(|(_, v)| v.unchecked_hint())
            .sum();
        let mean = (own + others) as f32 / st.params.groups as f32;
        let own_f = own as f32;
        if own > 1 && own_f > st.params.steal_high * mean {
            let n = ((own_f - mean) / 2.0).ceil() as usize;
            for c in self.queue.take_tail_unchecked(n) {
                st.buffer.push(c);
                self.counters.offloaded += 1;
            }
        } else if own_f < st.params.steal_low * mean && !st.buffer.is_empty() {
            let n = ((mean - own_f) / 2.0).ceil().max(1.0) as usize;
            self.adopt(n);
        }
    }
}
