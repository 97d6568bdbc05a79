//! Seeded synthetic datasets for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Rows drawn uniformly from `[-1, 1]^dim`.
pub fn uniform(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

/// Gaussian mixture with low-rank cluster covariance, the shape real
/// embedding sets tend to have.
///
/// A sample picks one of `clusters` centers, draws a latent offset in
/// `latent_dim` dimensions, maps it through a fixed random projection into
/// `dim` dimensions and adds small isotropic noise. The projection and the
/// centers depend only on `seed`, so base and query sets generated with the
/// same `seed` and a different `sample_seed` share one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub clusters: usize,
    pub latent_dim: usize,
    pub center_scale: f32,
    pub noise: f32,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            clusters: 32,
            latent_dim: 12,
            center_scale: 1.0,
            noise: 0.05,
            seed,
        }
    }

    /// Draws `n` rows as a flat row-major buffer.
    pub fn sample(&self, n: usize, sample_seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = |rng: &mut ChaCha8Rng| -> f32 { StandardNormal.sample(rng) };
        let centers: Vec<f32> = (0..self.clusters * self.dim)
            .map(|_| normal(&mut rng) * self.center_scale)
            .collect();
        // Projection rows scaled so a unit latent offset has unit norm in
        // expectation.
        let scale = 1.0 / (self.latent_dim as f32).sqrt();
        let projection: Vec<f32> = (0..self.latent_dim * self.dim)
            .map(|_| normal(&mut rng) * scale)
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut out = Vec::with_capacity(n * self.dim);
        let mut latent = vec![0.0f32; self.latent_dim];
        for _ in 0..n {
            let c = rng.random_range(0..self.clusters);
            latent.iter_mut().for_each(|z| *z = normal(&mut rng));
            let center = &centers[c * self.dim..(c + 1) * self.dim];
            for (j, &base) in center.iter().enumerate() {
                let mut x = base;
                for (l, &z) in latent.iter().enumerate() {
                    x += z * projection[l * self.dim + j];
                }
                x += normal(&mut rng) * self.noise;
                out.push(x);
            }
        }
        out
    }
}

/// Points of a `side × side` grid with a small seeded jitter so no two
/// pairwise distances tie.
pub fn jittered_grid(side: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            rows.push(vec![
                i as f32 + rng.random_range(-0.1f32..0.1),
                j as f32 + rng.random_range(-0.1f32..0.1),
            ]);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_is_seeded() {
        let spec = MixtureSpec::new(16, 5);
        assert_eq!(spec.sample(10, 1), spec.sample(10, 1));
        assert_ne!(spec.sample(10, 1), spec.sample(10, 2));
        assert_eq!(spec.sample(10, 1).len(), 160);
    }

    #[test]
    fn uniform_range() {
        let rows = uniform(50, 4, 9);
        assert!(rows.iter().flatten().all(|x| (-1.0..1.0).contains(x)));
    }
}
