//! Versioned, read-stable snapshot of one sub-queue.
//!
//! Single writer (the group's maintainer), any number of readers. Uses the
//! seqlock protocol: the version is odd while a publish is in progress and
//! readers retry when the version moved under them.

use std::sync::atomic::{fence, AtomicU32, AtomicU64, Ordering};

use crate::queue::Candidate;

const CHECKED_BIT: u64 = 1 << 31;
const NONE: u32 = u32::MAX;

#[inline]
fn pack(c: &Candidate) -> u64 {
    ((c.dist.to_bits() as u64) << 32) | c.id as u64 | if c.checked { CHECKED_BIT } else { 0 }
}

#[inline]
fn unpack(w: u64) -> Candidate {
    Candidate {
        id: (w & 0x7fff_ffff) as u32,
        dist: f32::from_bits((w >> 32) as u32),
        checked: w & CHECKED_BIT != 0,
    }
}

/// A consistent copy of a published sub-queue.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub version: u64,
    pub entries: Vec<Candidate>,
}

impl Snapshot {
    pub fn first_unchecked(&self) -> Option<&Candidate> {
        self.entries.iter().find(|c| !c.checked)
    }
}

pub struct SubQueueView {
    version: AtomicU64,
    len: AtomicU32,
    /// Unchecked entries in the last publish, readable without the seqlock.
    unchecked: AtomicU32,
    first_unchecked: AtomicU32,
    slots: Box<[AtomicU64]>,
}

impl std::fmt::Debug for SubQueueView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubQueueView")
            .field("version", &self.version())
            .field("len", &self.len.load(Ordering::Relaxed))
            .finish()
    }
}

impl SubQueueView {
    pub fn new(capacity: usize) -> Self {
        Self {
            version: AtomicU64::new(0),
            len: AtomicU32::new(0),
            unchecked: AtomicU32::new(0),
            first_unchecked: AtomicU32::new(NONE),
            slots: (0..capacity).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    pub fn version(&self) -> u64 {
        self.version.load(Ordering::Acquire)
    }

    /// Unchecked count of the latest publish (may be momentarily stale).
    #[inline]
    pub fn unchecked_hint(&self) -> usize {
        self.unchecked.load(Ordering::Relaxed) as usize
    }

    /// Publishes `entries`; only the owning maintainer may call this.
    /// Entries beyond capacity are not published.
    pub fn publish(&self, entries: &[Candidate]) {
        let n = entries.len().min(self.slots.len());
        let v = self.version.load(Ordering::Relaxed);
        debug_assert!(v % 2 == 0, "concurrent writers on a sub-queue view");
        self.version.store(v + 1, Ordering::Relaxed);
        fence(Ordering::Release);
        let mut unchecked = 0;
        let mut first = NONE;
        for (slot, c) in self.slots.iter().zip(&entries[..n]) {
            slot.store(pack(c), Ordering::Relaxed);
            if !c.checked {
                unchecked += 1;
                if first == NONE {
                    first = c.id;
                }
            }
        }
        self.len.store(n as u32, Ordering::Relaxed);
        self.first_unchecked.store(first, Ordering::Relaxed);
        self.unchecked.store(unchecked, Ordering::Relaxed);
        self.version.store(v + 2, Ordering::Release);
    }

    /// Copies the latest complete publish into `out`, retrying on a torn
    /// read. Returns the number of retries.
    pub fn read_into(&self, out: &mut Snapshot) -> u32 {
        let mut retries = 0;
        loop {
            let v1 = self.version.load(Ordering::Acquire);
            if v1 % 2 == 1 {
                retries += 1;
                std::hint::spin_loop();
                if retries % 64 == 0 {
                    std::thread::yield_now();
                }
                continue;
            }
            let n = (self.len.load(Ordering::Relaxed) as usize).min(self.slots.len());
            out.entries.clear();
            out.entries
                .extend(self.slots[..n].iter().map(|s| unpack(s.load(Ordering::Relaxed))));
            fence(Ordering::Acquire);
            if self.version.load(Ordering::Relaxed) == v1 {
                out.version = v1;
                return retries;
            }
            retries += 1;
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut s = Snapshot::default();
        self.read_into(&mut s);
        s
    }

    /// First unchecked vertex of the latest publish, with its version.
    pub fn first_unchecked(&self) -> (u64, Option<u32>) {
        loop {
            let v1 = self.version.load(Ordering::Acquire);
            if v1 % 2 == 1 {
                std::hint::spin_loop();
                continue;
            }
            let f = self.first_unchecked.load(Ordering::Relaxed);
            fence(Ordering::Acquire);
            if self.version.load(Ordering::Relaxed) == v1 {
                return (v1, (f != NONE).then_some(f));
            }
        }
    }
}
