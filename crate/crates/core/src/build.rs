//! Desk-scale Vamana-style graph builder.
//!
//! Random R-regular start, then two passes over a random vertex order:
//! greedy search from the medoid, robust prune of the visited set, and
//! reverse-edge insertion. Pruned lists are back-filled with the closest
//! rejected candidates up to R. Single-threaded and fully determined by the
//! seed.

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{resolve, DistanceFn, Kernel, Metric};
use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::neighbor::Neighbor;
use crate::queue::{Candidate, CandidateQueue};
use crate::store::VectorStore;
use crate::visit::VisitSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub max_degree: usize,
    pub build_beam: usize,
    pub alpha: f32,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            max_degree: 32,
            build_beam: 64,
            alpha: 1.2,
            seed: 7,
        }
    }
}

impl BuildParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.max_degree < 2 {
            return Err(Error::usage("R (max_degree) must be >= 2"));
        }
        if self.build_beam < self.max_degree {
            return Err(Error::usage("build beam must be >= R"));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::usage("alpha must be >= 1.0"));
        }
        if n < self.max_degree + 1 {
            return Err(Error::usage(format!(
                "N = {n} is too small for R = {} (need N >= R + 1)",
                self.max_degree
            )));
        }
        Ok(())
    }
}

/// The vector closest (squared L2) to the arithmetic mean; ties go to the
/// smaller ID.
pub fn medoid(store: &VectorStore) -> u32 {
    let dim = store.dim();
    let mut sum = vec![0.0f64; dim];
    for row in store.rows() {
        for (s, &x) in sum.iter_mut().zip(row) {
            *s += x as f64;
        }
    }
    let mean: Vec<f32> = sum.iter().map(|s| (s / store.len() as f64) as f32).collect();
    let l2 = resolve(Metric::L2Squared, store.kernel());
    let mut best = (f32::INFINITY, 0u32);
    for (id, row) in store.rows().enumerate() {
        let d = l2(&mean, row);
        if d < best.0 {
            best = (d, id as u32);
        }
    }
    best.1
}

struct Builder<'a> {
    store: &'a VectorStore,
    params: BuildParams,
    /// Geometry used for pruning; squared L2 for every metric.
    prune_dist: DistanceFn,
    adj: Vec<Vec<u32>>,
    entry: u32,
    visits: VisitSet,
    queue: CandidateQueue,
}

impl Builder<'_> {
    fn d(&self, a: u32, b: u32) -> f32 {
        (self.prune_dist)(self.store.vector(a), self.store.vector(b))
    }

    /// Beam search for vertex `p` on the graph under construction; returns
    /// the expanded vertices with their distances to `p`.
    fn greedy_visit(&mut self, p: u32) -> Vec<Neighbor> {
        let query = self.store.vector(p);
        self.visits.reset();
        self.queue.clear();
        self.visits.mark(self.entry);
        self.queue
            .insert(Candidate::unchecked(self.entry, (self.prune_dist)(query, self.store.vector(self.entry))));
        let mut expanded = Vec::new();
        let mut batch = Vec::new();
        while let Some(i) = self.queue.first_unchecked() {
            let c = self.queue.entries()[i];
            self.queue.mark_checked(i);
            expanded.push(c.neighbor());
            batch.clear();
            for &u in &self.adj[c.id as usize] {
                if self.visits.mark(u) {
                    batch.push(Neighbor::new(u, (self.prune_dist)(query, self.store.vector(u))));
                }
            }
            self.queue.merge(&batch);
            self.queue.resize();
        }
        expanded
    }

    /// Alpha-pruning over `cands` (distances to `p`), back-filled to R.
    fn robust_prune(&self, p: u32, mut cands: Vec<Neighbor>, alpha: f32) -> Vec<u32> {
        let r = self.params.max_degree;
        cands.retain(|c| c.id != p);
        cands.sort_unstable();
        cands.dedup_by_key(|c| c.id);
        let mut pruned = vec![false; cands.len()];
        let mut out = Vec::with_capacity(r);
        for i in 0..cands.len() {
            if pruned[i] {
                continue;
            }
            out.push(cands[i].id);
            if out.len() == r {
                break;
            }
            for j in i + 1..cands.len() {
                if !pruned[j] && alpha * self.d(cands[i].id, cands[j].id) <= cands[j].dist {
                    pruned[j] = true;
                }
            }
        }
        if out.len() < r {
            for (c, _) in cands.iter().zip(&pruned).filter(|(_, &p)| p) {
                out.push(c.id);
                if out.len() == r {
                    break;
                }
            }
        }
        out
    }

    fn with_dists(&self, p: u32, ids: &[u32]) -> Vec<Neighbor> {
        ids.iter().map(|&u| Neighbor::new(u, self.d(p, u))).collect()
    }

    fn pass(&mut self, order: &[u32], alpha: f32) {
        // lists may grow past R by this factor before a reverse-edge prune
        let slack = self.params.max_degree + self.params.max_degree.div_ceil(3);
        for &p in order {
            let mut cands = self.greedy_visit(p);
            let current = self.with_dists(p, &self.adj[p as usize]);
            cands.extend(current);
            let list = self.robust_prune(p, cands, alpha);
            for &j in &list {
                let jl = &mut self.adj[j as usize];
                if jl.contains(&p) {
                    continue;
                }
                jl.push(p);
                if jl.len() > slack {
                    let c = self.with_dists(j, &self.adj[j as usize]);
                    self.adj[j as usize] = self.robust_prune(j, c, alpha);
                }
            }
            self.adj[p as usize] = list;
        }
    }
}

/// Builds a graph over `store`.
pub fn build_desk_index(store: &VectorStore, params: &BuildParams) -> Result<GraphIndex> {
    let n = store.len();
    params.validate(n)?;
    let r = params.max_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let adj: Vec<Vec<u32>> = (0..n)
        .map(|v| {
            sample(&mut rng, n - 1, r)
                .into_iter()
                .map(|u| if u >= v { u as u32 + 1 } else { u as u32 })
                .collect()
        })
        .collect();
    let entry = medoid(store);
    let mut b = Builder {
        store,
        params: *params,
        prune_dist: resolve(Metric::L2Squared, Kernel::Optimized),
        adj,
        entry,
        visits: VisitSet::new(n),
        queue: CandidateQueue::new(params.build_beam),
    };
    let mut order: Vec<u32> = (0..n as u32).collect();
    for _ in 0..2 {
        order.shuffle(&mut rng);
        b.pass(&order, params.alpha);
    }
    for v in 0..n as u32 {
        if b.adj[v as usize].len() > r {
            let c = b.with_dists(v, &b.adj[v as usize]);
            b.adj[v as usize] = b.robust_prune(v, c, params.alpha);
        }
    }
    GraphIndex::from_adjacency(&b.adj, vec![entry], r as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundtruth::brute_force_topk;
    use crate::serial::{bfis_search, SearchParams};
    use crate::synth;

    fn params(r: usize, lb: usize, alpha: f32) -> BuildParams {
        BuildParams {
            max_degree: r,
            build_beam: lb,
            alpha,
            seed: 3,
        }
    }

    #[test]
    fn medoid_examples() {
        let s = VectorStore::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], Metric::L2Squared).unwrap();
        assert_eq!(medoid(&s), 1);
        let s = VectorStore::from_rows(&[vec![5.0, 5.0]], Metric::L2Squared).unwrap();
        assert_eq!(medoid(&s), 0);
    }

    #[test]
    fn medoid_matches_exhaustive_scan() {
        let rows = synth::uniform(500, 8, 21);
        let s = VectorStore::from_rows(&rows, Metric::L2Squared).unwrap();
        // independent: f64 centroid and f64 distances
        let mut c = vec![0.0f64; 8];
        for r in &rows {
            for (ci, x) in c.iter_mut().zip(r) {
                *ci += *x as f64 / 500.0;
            }
        }
        let oracle = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&c).map(|(x, m)| (*x as f64 - m).powi(2)).sum::<f64>(), i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        assert_eq!(medoid(&s), oracle as u32);
    }

    #[test]
    fn three_points_give_complete_graph() {
        let s = VectorStore::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], Metric::L2Squared).unwrap();
        let g = build_desk_index(&s, &params(2, 2, 1.2)).unwrap();
        for v in 0..3u32 {
            let mut nb = g.neighbors(v).to_vec();
            nb.sort();
            let expected: Vec<u32> = (0..3).filter(|&u| u != v).collect();
            assert_eq!(nb, expected);
        }
    }

    #[test]
    fn too_few_points() {
        let s = VectorStore::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], Metric::L2Squared).unwrap();
        assert!(matches!(build_desk_index(&s, &params(3, 3, 1.2)), Err(Error::Usage(_))));
        assert!(build_desk_index(&s, &params(2, 1, 1.2)).is_err());
        assert!(build_desk_index(&s, &params(2, 2, 0.9)).is_err());
    }

    #[test]
    fn grid_lists_contain_true_nearest() {
        let rows = synth::jittered_grid(7, 5);
        let n = rows.len();
        let s = VectorStore::from_rows(&rows, Metric::L2Squared).unwrap();
        let g = build_desk_index(&s, &params(4, n, 1.0)).unwrap();
        for v in 0..n as u32 {
            let nearest = (0..n as u32)
                .filter(|&u| u != v)
                .min_by(|&a, &b| s.distance_between(v, a).total_cmp(&s.distance_between(v, b)))
                .unwrap();
            assert!(g.neighbors(v).contains(&nearest), "vertex {v} misses {nearest}");
        }
    }

    #[test]
    fn seed_determinism_and_recall() {
        let rows = synth::uniform(1000, 16, 1);
        let s = VectorStore::from_rows(&rows, Metric::L2Squared).unwrap();
        let p = params(16, 32, 1.2);
        let g = build_desk_index(&s, &p).unwrap();
        assert_eq!(g, build_desk_index(&s, &p).unwrap());
        assert_eq!(g.reachable_count(), 1000);
        assert!((0..1000u32).all(|v| g.degree(v) <= 16));

        let queries = VectorStore::from_rows(&synth::uniform(100, 16, 2), Metric::L2Squared).unwrap();
        let gt = brute_force_topk(&s, &queries, 10).unwrap();
        let sp = SearchParams::new(64, 10);
        let mut hits = 0;
        for (i, q) in queries.rows().enumerate() {
            let ids = bfis_search(q, &g, &s, &sp).unwrap().ids();
            hits += gt.ids(i).iter().filter(|id| ids.contains(id)).count();
        }
        let recall = hits as f64 / 1000.0;
        assert!(recall >= 0.99, "recall {recall}");
    }
}
