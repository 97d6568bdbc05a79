//! Epoch-stamped visited sets: logical reset between queries is O(1).

use std::sync::atomic::{AtomicU32, Ordering};

#[derive(Debug, Clone)]
pub struct VisitSet {
    stamps: Vec<u32>,
    epoch: u32,
}

impl VisitSet {
    pub fn new(n: usize) -> Self {
        Self {
            stamps: vec![0; n],
            epoch: 1,
        }
    }

    pub fn capacity(&self) -> usize {
        self.stamps.len()
    }

    /// Starts a new query.
    pub fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    #[inline]
    pub fn is_visited(&self, v: u32) -> bool {
        self.stamps[v as usize] == self.epoch
    }

    /// Marks `v`; returns true if it was not yet visited this epoch.
    #[inline]
    pub fn mark(&mut self, v: u32) -> bool {
        let s = &mut self.stamps[v as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }
}

/// Shared visited flags with atomic test-and-set, for fork-join workers.
#[derive(Debug)]
pub struct AtomicVisitSet {
    stamps: Vec<AtomicU32>,
    epoch: u32,
}

impl AtomicVisitSet {
    pub fn new(n: usize) -> Self {
        Self {
            stamps: (0..n).map(|_| AtomicU32::new(0)).collect(),
            epoch: 1,
        }
    }

    pub fn capacity(&self) -> usize {
        self.stamps.len()
    }

    pub fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.iter_mut().for_each(|s| *s.get_mut() = 0);
            self.epoch = 1;
        }
    }

    /// Returns true for exactly one caller per vertex per epoch.
    #[inline]
    pub fn test_and_set(&self, v: u32) -> bool {
        self.stamps[v as usize].swap(self.epoch, Ordering::AcqRel) != self.epoch
    }

    #[inline]
    pub fn is_visited(&self, v: u32) -> bool {
        self.stamps[v as usize].load(Ordering::Acquire) == self.epoch
    }
}
