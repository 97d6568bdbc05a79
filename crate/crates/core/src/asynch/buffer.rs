use std::sync::atomic::{AtomicUsize, Ordering};

use crossbeam_queue::SegQueue;

use crate::queue::Candidate;

/// Unordered multi-producer multi-consumer pool of unchecked candidates
/// offloaded by overloaded maintainers. Each entry is popped by exactly one
/// consumer, so ownership moves atomically between sub-queues.
#[derive(Debug, Default)]
pub struct GlobalBuffer {
    queue: SegQueue<Candidate>,
    len: AtomicUsize,
}

impl GlobalBuffer {
    pub fn push(&self, c: Candidate) {
        debug_assert!(!c.checked);
        self.len.fetch_add(1, Ordering::AcqRel);
        self.queue.push(c);
    }

    pub fn pop(&self) -> Option<Candidate> {
        let c = self.queue.pop()?;
        self.len.fetch_sub(1, Ordering::AcqRel);
        Some(c)
    }

    /// Pops up to `max` entries into `out`.
    pub fn pop_many(&self, max: usize, out: &mut Vec<Candidate>) -> usize {
        let mut n = 0;
        while n < max {
            match self.pop() {
                Some(c) => {
                    out.push(c);
                    n += 1;
                }
                None => break,
            }
        }
        n
    }

    pub fn len(&self) -> usize {
        self.len.load(Ordering::Acquire)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops everything left; returns how many entries were discarded.
    pub fn drain(&self) -> usize {
        let mut n = 0;
        while self.pop().is_some() {
            n += 1;
        }
        n
    }
}
