//! Per-query distance board: one slot per vertex holding a write-once
//! distance and four flags (claim, ready, visited, scanned).
//!
//! Each slot's state word carries the query epoch in its high bits, so a
//! new query logically clears every flag without touching memory.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use crossbeam_utils::Backoff;

const CLAIM: u32 = 1;
const READY: u32 = 1 << 1;
const VISITED: u32 = 1 << 2;
const SCANNED: u32 = 1 << 3;
const FLAG_BITS: u32 = 4;
const MAX_EPOCH: u32 = u32::MAX >> FLAG_BITS;

/// Result of [`DistanceBoard::claim_or_read`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Claim {
    /// This caller won the claim and computed the distance.
    Computed(f32),
    /// The distance was already published.
    Reused(f32),
    /// Another caller holds the claim and has not published yet.
    LostClaim,
}

impl Claim {
    pub fn distance(self) -> Option<f32> {
        match self {
            Claim::Computed(d) | Claim::Reused(d) => Some(d),
            Claim::LostClaim => None,
        }
    }
}

pub struct DistanceBoard {
    state: Box<[AtomicU32]>,
    dist: Box<[AtomicU32]>,
    epoch: u32,
    /// Ready flag found already set when publishing (must stay zero).
    double_publish: AtomicU64,
}

impl std::fmt::Debug for DistanceBoard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistanceBoard")
            .field("len", &self.state.len())
            .field("epoch", &self.epoch)
            .finish()
    }
}

impl DistanceBoard {
    pub fn new(n: usize) -> Self {
        Self {
            state: (0..n).map(|_| AtomicU32::new(0)).collect(),
            dist: (0..n).map(|_| AtomicU32::new(0)).collect(),
            epoch: 1,
            double_publish: AtomicU64::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Starts a new query.
    pub fn reset(&mut self) {
        self.epoch += 1;
        if self.epoch > MAX_EPOCH {
            self.state.iter_mut().for_each(|s| *s.get_mut() = 0);
            self.epoch = 1;
        }
        *self.double_publish.get_mut() = 0;
    }

    #[inline]
    fn flags(&self, v: u32) -> u32 {
        let s = self.state[v as usize].load(Ordering::Acquire);
        if s >> FLAG_BITS == self.epoch {
            s
        } else {
            0
        }
    }

    /// Sets `flag`; true if this call set it.
    #[inline]
    fn set(&self, v: u32, flag: u32) -> bool {
        let slot = &self.state[v as usize];
        let mut cur = slot.load(Ordering::Acquire);
        loop {
            let base = if cur >> FLAG_BITS == self.epoch {
                cur
            } else {
                self.epoch << FLAG_BITS
            };
            if base & flag != 0 {
                return false;
            }
            match slot.compare_exchange_weak(cur, base | flag, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return true,
                Err(actual) => cur = actual,
            }
        }
    }

    #[inline]
    pub fn is_ready(&self, v: u32) -> bool {
        self.flags(v) & READY != 0
    }

    #[inline]
    pub fn is_claimed(&self, v: u32) -> bool {
        self.flags(v) & CLAIM != 0
    }

    #[inline]
    pub fn is_visited(&self, v: u32) -> bool {
        self.flags(v) & VISITED != 0
    }

    #[inline]
    pub fn is_scanned(&self, v: u32) -> bool {
        self.flags(v) & SCANNED != 0
    }

    /// Published distance, if any.
    #[inline]
    pub fn read(&self, v: u32) -> Option<f32> {
        if self.is_ready(v) {
            Some(f32::from_bits(self.dist[v as usize].load(Ordering::Relaxed)))
        } else {
            None
        }
    }

    /// Visited test-and-set; true for exactly one caller per query.
    #[inline]
    pub fn mark_visited(&self, v: u32) -> bool {
        self.set(v, VISITED)
    }

    #[inline]
    pub fn mark_scanned(&self, v: u32) -> bool {
        self.set(v, SCANNED)
    }

    /// Exactly one caller per vertex per query wins the claim and runs
    /// `compute`; the distance is stored before the ready flag is raised.
    #[inline]
    pub fn claim_or_read(&self, v: u32, compute: impl FnOnce() -> f32) -> Claim {
        if self.set(v, CLAIM) {
            let d = compute();
            self.dist[v as usize].store(d.to_bits(), Ordering::Relaxed);
            if !self.set(v, READY) {
                self.double_publish.fetch_add(1, Ordering::Relaxed);
            }
            Claim::Computed(d)
        } else {
            match self.read(v) {
                Some(d) => Claim::Reused(d),
                None => Claim::LostClaim,
            }
        }
    }

    /// Spins until `v` is published. Only valid once `v` is claimed; the
    /// claimer always publishes right after computing.
    pub fn wait_ready(&self, v: u32) -> f32 {
        let backoff = Backoff::new();
        loop {
            if let Some(d) = self.read(v) {
                return d;
            }
            backoff.snooze();
            if backoff.is_completed() {
                std::thread::yield_now();
            }
        }
    }

    /// Number of vertices claimed in the current query. O(N); audit only.
    pub fn claimed_count(&self) -> usize {
        (0..self.state.len() as u32).filter(|&v| self.is_claimed(v)).count()
    }

    /// Claimed-but-unpublished slots plus double publications. Must be zero
    /// once every thread of the query has stopped.
    pub fn write_once_violations(&self) -> u64 {
        let pending = (0..self.state.len() as u32)
            .filter(|&v| self.is_claimed(v) && !self.is_ready(v))
            .count() as u64;
        pending + self.double_publish.load(Ordering::Relaxed)
    }
}
