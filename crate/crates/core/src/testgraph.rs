//! The small directed example graph used throughout the tests: edges
//! 1→{4,5}, 2→{6,7}, 3→{8}, 6→{10}, entry set {1,2,3}.
//!
//! Vertex IDs 1–10 are kept as-is, so the graph carries eleven vertices
//! with 0 and 9 isolated.

use crate::distance::Metric;
use crate::graph::GraphIndex;
use crate::store::VectorStore;

pub const EXAMPLE_VERTICES: usize = 11;

pub fn example_graph() -> GraphIndex {
    let mut lists = vec![Vec::new(); EXAMPLE_VERTICES];
    lists[1] = vec![4, 5];
    lists[2] = vec![6, 7];
    lists[3] = vec![8];
    lists[6] = vec![10];
    GraphIndex::from_adjacency(&lists, vec![1, 2, 3], 2).unwrap()
}

/// One-dimensional store where vertex `i` sits at `positions[i]`; with a
/// query at the origin and squared L2, distance order equals position order.
pub fn store_at(positions: &[f32]) -> VectorStore {
    VectorStore::new(positions.to_vec(), 1, Metric::L2Squared).unwrap()
}

/// Vertex `i` at position `i` (vertex 0 at 100 so it never wins a tie).
pub fn identity_store() -> VectorStore {
    let mut p: Vec<f32> = (0..EXAMPLE_VERTICES).map(|i| i as f32).collect();
    p[0] = 100.0;
    store_at(&p)
}

/// Distances for which a width-3 fork-join epoch expands vertex 10 although
/// a serial search at L = 5 prunes it.
pub fn redundant_store() -> VectorStore {
    //        0      1    2    3    4    5    6    7    8    9     10
    store_at(&[100.0, 1.0, 2.0, 3.0, 4.0, 8.0, 5.0, 9.0, 7.0, 100.0, 6.0])
}

pub const ORIGIN: [f32; 1] = [0.0];
