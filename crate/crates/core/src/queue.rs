//! Distance-sorted bounded candidate queue (sorted array, shift insert).

use crate::neighbor::{cmp_dist_id, Neighbor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: u32,
    pub dist: f32,
    pub checked: bool,
}

impl Candidate {
    pub fn unchecked(id: u32, dist: f32) -> Self {
        Self { id, dist, checked: false }
    }

    pub fn neighbor(&self) -> Neighbor {
        Neighbor::new(self.id, self.dist)
    }
}

/// Entries sorted ascending by (dist, id) with capacity `L`.
///
/// The queue may hold more than `L` entries between a merge and the next
/// [`resize`](Self::resize). All entries before `hint` are checked.
#[derive(Debug, Clone)]
pub struct CandidateQueue {
    entries: Vec<Candidate>,
    capacity: usize,
    hint: usize,
}

impl CandidateQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity + 64),
            capacity,
            hint: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.hint = 0;
    }

    fn position(&self, c: &Candidate) -> usize {
        self.entries
            .partition_point(|e| cmp_dist_id(e.dist, e.id, c.dist, c.id).is_lt())
    }

    /// Shift-inserts one candidate; returns its index.
    pub fn insert(&mut self, c: Candidate) -> usize {
        let pos = self.position(&c);
        self.entries.insert(pos, c);
        if !c.checked {
            self.hint = self.hint.min(pos);
        }
        pos
    }

    /// Merges a batch of new unchecked candidates.
    pub fn merge(&mut self, batch: &[Neighbor]) {
        if batch.len() <= 4 {
            for n in batch {
                self.insert(Candidate::unchecked(n.id, n.dist));
            }
            return;
        }
        let mut sorted: Vec<Neighbor> = batch.to_vec();
        sorted.sort_unstable();
        let old = std::mem::take(&mut self.entries);
        let mut merged = Vec::with_capacity(old.len() + sorted.len());
        let (mut i, mut j) = (0, 0);
        let mut first_new = usize::MAX;
        while i < old.len() || j < sorted.len() {
            let take_old = j == sorted.len()
                || (i < old.len() && cmp_dist_id(old[i].dist, old[i].id, sorted[j].dist, sorted[j].id).is_lt());
            if take_old {
                merged.push(old[i]);
                i += 1;
            } else {
                first_new = first_new.min(merged.len());
                merged.push(Candidate::unchecked(sorted[j].id, sorted[j].dist));
                j += 1;
            }
        }
        self.entries = merged;
        self.hint = self.hint.min(first_new);
    }

    /// Index of the first unchecked candidate.
    pub fn first_unchecked(&mut self) -> Option<usize> {
        while self.hint < self.entries.len() && self.entries[self.hint].checked {
            self.hint += 1;
        }
        (self.hint < self.entries.len()).then_some(self.hint)
    }

    pub fn has_unchecked(&mut self) -> bool {
        self.first_unchecked().is_some()
    }

    pub fn unchecked_count(&self) -> usize {
        self.entries[self.hint.min(self.entries.len())..]
            .iter()
            .filter(|c| !c.checked)
            .count()
    }

    pub fn mark_checked(&mut self, index: usize) {
        self.entries[index].checked = true;
    }

    /// Truncates to `len`; returns how many unchecked entries were dropped.
    pub fn truncate(&mut self, len: usize) -> usize {
        if len >= self.entries.len() {
            return 0;
        }
        let dropped = self.entries[len..].iter().filter(|c| !c.checked).count();
        self.entries.truncate(len);
        self.hint = self.hint.min(len);
        dropped
    }

    /// Keeps the best `capacity` entries; returns dropped unchecked count.
    pub fn resize(&mut self) -> usize {
        self.truncate(self.capacity)
    }

    /// Drops every entry with `dist > threshold`; returns dropped unchecked
    /// count.
    pub fn prune_above(&mut self, threshold: f32) -> usize {
        let keep = self.entries.partition_point(|e| e.dist <= threshold);
        self.truncate(keep)
    }

    /// Removes up to `count` unchecked entries starting from the tail.
    pub fn take_tail_unchecked(&mut self, count: usize) -> Vec<Candidate> {
        let mut taken = Vec::with_capacity(count);
        let mut i = self.entries.len();
        while i > 0 && taken.len() < count {
            i -= 1;
            if !self.entries[i].checked {
                taken.push(self.entries.remove(i));
            }
        }
        self.hint = self.hint.min(i);
        taken
    }

    pub fn top_ids(&self, k: usize) -> Vec<u32> {
        self.entries.iter().take(k).map(|c| c.id).collect()
    }

    pub fn top(&self, k: usize) -> Vec<Neighbor> {
        self.entries.iter().take(k).map(Candidate::neighbor).collect()
    }

    /// Sortedness, uniqueness and length bound (`allow_overflow` skips the
    /// bound for the transient post-merge state).
    pub fn check_invariants(&self, allow_overflow: bool) -> Result<(), String> {
        if let Some(w) = self
            .entries
            .windows(2)
            .find(|w| !cmp_dist_id(w[0].dist, w[0].id, w[1].dist, w[1].id).is_lt())
        {
            return Err(format!("queue out of order at ({}, {}) -> ({}, {})", w[0].id, w[0].dist, w[1].id, w[1].dist));
        }
        let mut ids: Vec<u32> = self.entries.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("vertex {} queued twice", w[0]));
        }
        if !allow_overflow && self.entries.len() > self.capacity {
            return Err(format!("queue length {} exceeds L = {}", self.entries.len(), self.capacity));
        }
        if self.entries[..self.hint.min(self.entries.len())].iter().any(|c| !c.checked) {
            return Err("unchecked entry before scan hint".into());
        }
        Ok(())
    }
}
