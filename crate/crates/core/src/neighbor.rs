use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// A vertex paired with its distance to the current query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: u32,
    pub dist: f32,
}

impl Neighbor {
    pub fn new(id: u32, dist: f32) -> Self {
        Self { id, dist }
    }
}

/// Total order used everywhere: ascending distance, ties by ascending ID.
#[inline]
pub fn cmp_dist_id(a_dist: f32, a_id: u32, b_dist: f32, b_id: u32) -> Ordering {
    a_dist.total_cmp(&b_dist).then(a_id.cmp(&b_id))
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_dist_id(self.dist, self.id, other.dist, other.id)
    }
}
