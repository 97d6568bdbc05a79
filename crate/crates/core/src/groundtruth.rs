use crate::error::{Error, Result};
use crate::neighbor::Neighbor;
use crate::store::VectorStore;

/// Exact nearest neighbors per query, sorted by (distance, ID).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    k: usize,
    lists: Vec<Vec<Neighbor>>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, query: usize) -> &[Neighbor] {
        &self.lists[query]
    }

    pub fn ids(&self, query: usize) -> Vec<u32> {
        self.lists[query].iter().map(|n| n.id).collect()
    }

    pub fn all_ids(&self) -> Vec<Vec<u32>> {
        (0..self.len()).map(|q| self.ids(q)).collect()
    }

    /// Wraps ID lists read from an ivecs file. Distances are unknown and
    /// stored as NaN; only IDs participate in recall.
    pub fn from_ids(ids: Vec<Vec<u32>>) -> Result<Self> {
        let k = ids.first().map(Vec::len).unwrap_or(0);
        if ids.iter().any(|l| l.len() != k) {
            return Err(Error::usage("ground-truth lists have differing lengths"));
        }
        let lists = ids
            .into_iter()
            .map(|l| l.into_iter().map(|id| Neighbor::new(id, f32::NAN)).collect())
            .collect();
        Ok(Self { k, lists })
    }

    /// Keeps only the first `k` entries of every list.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.k {
            return Err(Error::usage(format!("ground truth holds {} neighbors, asked for {k}", self.k)));
        }
        Ok(Self {
            k,
            lists: self.lists.iter().map(|l| l[..k].to_vec()).collect(),
        })
    }
}

/// Exact top-k of one query by exhaustive scan.
pub fn exact_topk(store: &VectorStore, query: &[f32], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = (0..store.len() as u32)
        .map(|id| Neighbor::new(id, store.distance_to(query, id)))
        .collect();
    if k < all.len() {
        all.select_nth_unstable(k);
        all.truncate(k);
    }
    all.sort_unstable();
    all
}

/// Exact `k` nearest neighbors for every query row under `store`'s metric.
pub fn brute_force_topk(store: &VectorStore, queries: &VectorStore, k: usize) -> Result<GroundTruth> {
    if k == 0 || k > store.len() {
        return Err(Error::usage(format!("K={k} must be in 1..={}", store.len())));
    }
    if queries.dim() != store.dim() {
        return Err(Error::usage(format!(
            "query dimension {} differs from base dimension {}",
            queries.dim(),
            store.dim()
        )));
    }
    let lists = queries.rows().map(|q| exact_topk(store, q, k)).collect();
    Ok(GroundTruth { k, lists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::Metric;
    use crate::synth;

    fn line() -> VectorStore {
        VectorStore::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], Metric::L2Squared).unwrap()
    }

    #[test]
    fn one_dimensional_ordering() {
        let q = VectorStore::from_rows(&[vec![0.1]], Metric::L2Squared).unwrap();
        let gt = brute_force_topk(&line(), &q, 2).unwrap();
        assert_eq!(gt.ids(0), vec![0, 1]);
    }

    #[test]
    fn k_equals_n_is_full_sort() {
        let q = VectorStore::from_rows(&[vec![1.8]], Metric::L2Squared).unwrap();
        let gt = brute_force_topk(&line(), &q, 3).unwrap();
        assert_eq!(gt.ids(0), vec![2, 1, 0]);
    }

    #[test]
    fn k_too_large() {
        let q = VectorStore::from_rows(&[vec![0.0]], Metric::L2Squared).unwrap();
        assert!(matches!(brute_force_topk(&line(), &q, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn ties_by_smaller_id() {
        let s = VectorStore::from_rows(&[vec![1.0], vec![-1.0], vec![1.0]], Metric::L2Squared).unwrap();
        let q = VectorStore::from_rows(&[vec![0.0]], Metric::L2Squared).unwrap();
        assert_eq!(brute_force_topk(&s, &q, 3).unwrap().ids(0), vec![0, 1, 2]);
    }

    /// Independent quadratic scan: insertion into a sorted list, no
    /// selection step and no shared helpers.
    fn quadratic_oracle(base: &[Vec<f32>], q: &[f32], k: usize) -> Vec<u32> {
        let mut best: Vec<(f64, u32)> = Vec::new();
        for (id, v) in base.iter().enumerate() {
            let d: f64 = v.iter().zip(q).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
            let pos = best
                .iter()
                .position(|&(bd, bid)| d < bd || (d == bd && (id as u32) < bid))
                .unwrap_or(best.len());
            best.insert(pos, (d, id as u32));
        }
        best.into_iter().take(k).map(|(_, id)| id).collect()
    }

    #[test]
    fn matches_quadratic_oracle() {
        let base = synth::uniform(100, 16, 11);
        let queries = synth::uniform(20, 16, 12);
        let store = VectorStore::from_rows(&base, Metric::L2Squared).unwrap();
        let qs = VectorStore::from_rows(&queries, Metric::L2Squared).unwrap();
        let gt = brute_force_topk(&store, &qs, 10).unwrap();
        for (i, q) in queries.iter().enumerate() {
            assert_eq!(gt.ids(i), quadratic_oracle(&base, q, 10));
            let d = gt.neighbors(i);
            assert!(d.windows(2).all(|w| w[0].dist <= w[1].dist));
        }
    }

    #[test]
    fn permutation_invariant_up_to_relabel() {
        let base = synth::uniform(60, 8, 3);
        let perm: Vec<usize> = (0..60).rev().collect();
        let permuted: Vec<Vec<f32>> = perm.iter().map(|&i| base[i].clone()).collect();
        let q = VectorStore::from_rows(&synth::uniform(5, 8, 4), Metric::L2Squared).unwrap();
        let a = brute_force_topk(&VectorStore::from_rows(&base, Metric::L2Squared).unwrap(), &q, 7).unwrap();
        let b = brute_force_topk(&VectorStore::from_rows(&permuted, Metric::L2Squared).unwrap(), &q, 7).unwrap();
        for i in 0..5 {
            let relabeled: Vec<u32> = b.ids(i).iter().map(|&id| perm[id as usize] as u32).collect();
            assert_eq!(a.ids(i), relabeled);
        }
    }
}
