use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};

/// Query-wide progress accounting behind the termination predicate.
///
/// `pending` counts unchecked candidates held anywhere: in a sub-queue or
/// in the global buffer. A maintainer adds the candidates it merges before
/// retiring the vertex it expanded, so the count cannot touch zero while a
/// merge is in flight. Moving entries through the buffer leaves the count
/// unchanged. Zero therefore means every sub-queue is fully checked, the
/// buffer is empty and no maintainer is mid-merge; nobody can raise it
/// again afterwards, and the first observer latches `ended`.
#[derive(Debug, Default)]
pub struct Termination {
    pending: AtomicI64,
    ended: AtomicBool,
}

impl Termination {
    pub fn reset(&self) {
        self.pending.store(0, Ordering::Release);
        self.ended.store(false, Ordering::Release);
    }

    /// New unchecked candidates entered a sub-queue.
    #[inline]
    pub fn added(&self, n: usize) {
        if n > 0 {
            self.pending.fetch_add(n as i64, Ordering::AcqRel);
        }
    }

    /// Unchecked candidates left the system (checked, pruned or discarded).
    #[inline]
    pub fn retired(&self, n: usize) {
        if n > 0 {
            let prev = self.pending.fetch_sub(n as i64, Ordering::AcqRel);
            debug_assert!(prev >= n as i64, "pending count underflow");
        }
    }

    pub fn pending(&self) -> i64 {
        self.pending.load(Ordering::Acquire)
    }

    /// True once no unchecked work remains anywhere; stays true.
    pub fn terminate_query(&self) -> bool {
        if self.ended.load(Ordering::Acquire) {
            return true;
        }
        if self.pending.load(Ordering::Acquire) == 0 {
            self.ended.store(true, Ordering::Release);
            return true;
        }
        false
    }

    #[inline]
    pub fn ended(&self) -> bool {
        self.ended.load(Ordering::Acquire)
    }

    /// Forces termination (used when a debug check aborts the query).
    pub fn abort(&self) {
        self.ended.store(true, Ordering::Release);
    }
}
