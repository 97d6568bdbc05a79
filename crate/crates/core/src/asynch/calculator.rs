//! Distance calculator: speculatively computes neighbor distances for the
//! unchecked candidates of its group's published view.

use std::time::Instant;

use crossbeam_utils::Backoff;

use super::{Claim, QueryState, RoleCounters, Snapshot};
use crate::metrics::{Lap, ThreadTimes};
use crate::serial::SearchStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalcStep {
    /// Computed and published the distance of this vertex.
    Computed(u32),
    /// All out-edges of this candidate are claimed.
    FinishedVertex(u32),
    Idle,
    Ended,
}

#[derive(Debug)]
pub struct CalculatorResult {
    /// Candidates whose out-edges this thread finished, in order.
    pub scans: Vec<u32>,
    pub stats: SearchStats,
    pub counters: RoleCounters,
    pub times: ThreadTimes,
}

#[derive(Debug, Clone, Copy)]
struct Scan {
    v: u32,
    start: usize,
    done: usize,
}

pub struct Calculator<'s, 'a> {
    state: &'s QueryState<'a>,
    group: usize,
    index: usize,
    snap: Snapshot,
    cursor: usize,
    current: Option<Scan>,
    scans: Vec<u32>,
    stats: SearchStats,
    counters: RoleCounters,
    times: ThreadTimes,
    start: Instant,
    lap: Lap,
}

impl<'s, 'a> Calculator<'s, 'a> {
    /// Calculator `index` of `group`; its edge scans start at offset
    /// `index * degree / discal_per_group` so siblings spread out.
    pub fn new(state: &'s QueryState<'a>, group: usize, index: usize) -> Self {
        let start = Instant::now();
        Self {
            state,
            group,
            index,
            snap: Snapshot::default(),
            cursor: 0,
            current: None,
            scans: Vec::new(),
            stats: SearchStats::default(),
            counters: RoleCounters::default(),
            times: ThreadTimes::default(),
            start,
            lap: Lap(start),
        }
    }

    /// The candidate currently being scanned.
    pub fn current(&self) -> Option<u32> {
        self.current.map(|s| s.v)
    }

    pub fn step(&mut self) -> CalcStep {
        let st = self.state;
        if st.termination.ended() {
            return CalcStep::Ended;
        }
        if self.current.is_none() {
            let view = &st.views[self.group];
            if view.version() != self.snap.version {
                self.counters.view_retries += view.read_into(&mut self.snap) as u64;
                self.cursor = 0;
            }
            while self.cursor < self.snap.entries.len() {
                let c = self.snap.entries[self.cursor];
                self.cursor += 1;
                if !c.checked && !st.board.is_scanned(c.id) {
                    let deg = st.graph.degree(c.id);
                    let per = st.params.discal_per_group.max(1);
                    self.current = Some(Scan {
                        v: c.id,
                        start: self.index * deg / per,
                        done: 0,
                    });
                    break;
                }
            }
            if self.current.is_none() {
                return CalcStep::Idle;
            }
            self.times.sync_ns += self.lap.take();
        }

        let scan = self.current.as_mut().expect("set above");
        let nbrs = st.graph.neighbors(scan.v);
        while scan.done < nbrs.len() {
            let u = nbrs[(scan.start + scan.done) % nbrs.len()];
            scan.done += 1;
            if st.board.is_claimed(u) {
                continue;
            }
            if let Claim::Computed(_) = st.board.claim_or_read(u, || st.store.distance_to(st.query, u)) {
                self.stats.note_distance(st.store);
                self.counters.computed += 1;
                return CalcStep::Computed(u);
            }
        }
        let v = scan.v;
        self.current = None;
        st.board.mark_scanned(v);
        self.stats.note_scan(nbrs.len());
        self.counters.scanned += 1;
        self.scans.push(v);
        self.times.scans.push((v, self.lap.take()));
        CalcStep::FinishedVertex(v)
    }

    pub fn run(mut self) -> CalculatorResult {
        let backoff = Backoff::new();
        loop {
            match self.step() {
                CalcStep::Computed(_) | CalcStep::FinishedVertex(_) => backoff.reset(),
                CalcStep::Idle => {
                    backoff.snooze();
                    if backoff.is_completed() {
                        std::thread::yield_now();
                    }
                }
                CalcStep::Ended => break,
            }
        }
        self.finish()
    }

    pub fn finish(mut self) -> CalculatorResult {
        self.times.sync_ns += self.lap.take();
        self.times.total_ns = self.start.elapsed().as_nanos() as u64;
        CalculatorResult {
            scans: self.scans,
            stats: self.stats,
            counters: self.counters,
            times: self.times,
        }
    }
}
