//! L-threshold: the shared pruning bound and its pointer-merge estimator.

use std::sync::atomic::{AtomicU32, Ordering};

/// Estimates the L-th smallest distance over several ascending sequences.
///
/// One pointer per sequence starts past its end; the pointer whose
/// preceding element is largest steps back, as in a reversed merge, until
/// exactly `l` elements remain in front of the pointers. The largest of
/// those is returned. With `l` or fewer elements in total nothing would be
/// pruned and the result is `+inf`.
pub fn estimate_l_threshold<S: AsRef<[f32]>>(snapshots: &[S], l: usize) -> f32 {
    let total: usize = snapshots.iter().map(|s| s.as_ref().len()).sum();
    if total <= l || l == 0 {
        return f32::INFINITY;
    }
    let mut ptr: Vec<usize> = snapshots.iter().map(|s| s.as_ref().len()).collect();
    let mut remaining = total;
    while remaining > l {
        let mut widest = None;
        for (i, s) in snapshots.iter().enumerate() {
            if ptr[i] > 0 {
                let tail = s.as_ref()[ptr[i] - 1];
                if widest.is_none_or(|(_, best): (usize, f32)| tail > best) {
                    widest = Some((i, tail));
                }
            }
        }
        let (i, _) = widest.expect("remaining > l implies a non-empty prefix");
        ptr[i] -= 1;
        remaining -= 1;
    }
    snapshots
        .iter()
        .zip(&ptr)
        .filter(|(_, &p)| p > 0)
        .map(|(s, &p)| s.as_ref()[p - 1])
        .fold(f32::NEG_INFINITY, f32::max)
}

/// Shared pruning bound, `+inf` until first published. Only ever lowered
/// within a query: every estimate is an upper bound on the true L-th
/// distance at the time of its snapshot, and that true value never rises.
#[derive(Debug)]
pub struct LThreshold(AtomicU32);

impl Default for LThreshold {
    fn default() -> Self {
        Self(AtomicU32::new(f32::INFINITY.to_bits()))
    }
}

impl LThreshold {
    #[inline]
    pub fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Acquire))
    }

    /// Lowers the bound to `value` if smaller.
    pub fn publish(&self, value: f32) {
        let mut cur = self.0.load(Ordering::Acquire);
        while value < f32::from_bits(cur) {
            match self
                .0
                .compare_exchange_weak(cur, value.to_bits(), Ordering::AcqRel, Ordering::Acquire)
            {
                Ok(_) => return,
                Err(actual) => cur = actual,
            }
        }
    }

    pub fn reset(&self) {
        self.0.store(f32::INFINITY.to_bits(), Ordering::Release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_interleaved_queues() {
        let q1 = [1.0, 3.0, 5.0, 7.0];
        let q2 = [2.0, 4.0, 6.0, 8.0];
        assert_eq!(estimate_l_threshold(&[&q1[..], &q2[..]], 5), 5.0);
    }

    #[test]
    fn single_snapshot_exact() {
        assert_eq!(estimate_l_threshold(&[[1.0f32, 2.0, 3.0, 4.0]], 3), 3.0);
        // exactly L elements: nothing to prune
        assert_eq!(estimate_l_threshold(&[[1.0f32, 2.0, 3.0]], 3), f32::INFINITY);
    }

    #[test]
    fn too_few_candidates() {
        let empty: [f32; 0] = [];
        assert_eq!(estimate_l_threshold(&[&empty[..], &[10.0, 20.0][..]], 5), f32::INFINITY);
        assert_eq!(estimate_l_threshold::<Vec<f32>>(&[], 5), f32::INFINITY);
    }

    #[test]
    fn threshold_only_lowers() {
        let t = LThreshold::default();
        assert_eq!(t.get(), f32::INFINITY);
        t.publish(5.0);
        t.publish(7.0);
        assert_eq!(t.get(), 5.0);
        t.publish(4.5);
        assert_eq!(t.get(), 4.5);
        t.reset();
        assert_eq!(t.get(), f32::INFINITY);
    }

    proptest! {
        #[test]
        fn equals_exact_lth_smallest(
            snaps in prop::collection::vec(prop::collection::vec(0u16..500, 0..40), 1..6),
            l in 1usize..64,
        ) {
            let snaps: Vec<Vec<f32>> = snaps
                .into_iter()
                .map(|mut s| { s.sort_unstable(); s.into_iter().map(f32::from).collect() })
                .collect();
            let mut all: Vec<f32> = snaps.concat();
            all.sort_by(f32::total_cmp);
            let got = estimate_l_threshold(&snaps, l);
            if all.len() > l {
                prop_assert_eq!(got, all[l - 1]);
            } else {
                prop_assert_eq!(got, f32::INFINITY);
            }
        }
    }
}
