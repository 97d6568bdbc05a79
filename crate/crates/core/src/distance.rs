//! Distance kernels.
//!
//! Every metric is expressed as "smaller is closer": inner product is
//! negated at the kernel boundary so search code only ever minimizes.
//! A scalar reference kernel is always available next to the optimized
//! one so the two can be cross-checked at runtime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    L2Squared,
    InnerProduct,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "l2squared" | "l2_squared" | "euclidean" => Ok(Metric::L2Squared),
            "ip" | "inner_product" | "innerproduct" | "dot" => Ok(Metric::InnerProduct),
            other => Err(Error::usage(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::L2Squared => f.write_str("l2"),
            Metric::InnerProduct => f.write_str("ip"),
        }
    }
}

/// Which implementation computes distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Straight left-to-right accumulation.
    Scalar,
    /// Best available: AVX2+FMA when the CPU has it, otherwise an unrolled
    /// eight-lane loop the compiler vectorizes.
    #[default]
    Optimized,
}

pub type DistanceFn = fn(&[f32], &[f32]) -> f32;

/// Checked distance between two vectors of equal length.
pub fn distance(a: &[f32], b: &[f32], metric: Metric) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(resolve(metric, Kernel::Optimized)(a, b))
}

/// Returns the kernel function for a metric. Callers must pass equal-length
/// slices; the kernels only debug-assert it.
pub fn resolve(metric: Metric, kernel: Kernel) -> DistanceFn {
    match (metric, kernel) {
        (Metric::L2Squared, Kernel::Scalar) => l2_scalar,
        (Metric::InnerProduct, Kernel::Scalar) => neg_ip_scalar,
        (Metric::L2Squared, Kernel::Optimized) => {
            #[cfg(target_arch = "x86_64")]
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                return x86::l2_avx2_entry;
            }
            l2_unrolled
        }
        (Metric::InnerProduct, Kernel::Optimized) => {
            #[cfg(target_arch = "x86_64")]
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                return x86::neg_ip_avx2_entry;
            }
            neg_ip_unrolled
        }
    }
}

pub fn l2_scalar(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum
}

pub fn neg_ip_scalar(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        sum += x * y;
    }
    -sum
}

const LANES: usize = 8;

fn l2_unrolled(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for (ca, cb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for i in 0..LANES {
            let d = ca[i] - cb[i];
            acc[i] += d * d;
        }
    }
    let mut sum = acc.iter().sum::<f32>();
    for i in chunks * LANES..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    sum
}

fn neg_ip_unrolled(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for (ca, cb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for i in 0..LANES {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut sum = acc.iter().sum::<f32>();
    for i in chunks * LANES..a.len() {
        sum += a[i] * b[i];
    }
    -sum
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use std::arch::x86_64::*;

    pub(super) fn l2_avx2_entry(a: &[f32], b: &[f32]) -> f32 {
        // SAFETY: only handed out by `resolve` after feature detection.
        unsafe { l2_avx2(a, b) }
    }

    pub(super) fn neg_ip_avx2_entry(a: &[f32], b: &[f32]) -> f32 {
        // SAFETY: as above.
        unsafe { -ip_avx2(a, b) }
    }

    #[inline]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn hsum(v: __m256) -> f32 {
        let hi = _mm256_extractf128_ps(v, 1);
        let lo = _mm256_castps256_ps128(v);
        let s = _mm_add_ps(hi, lo);
        let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
        _mm_cvtss_f32(s)
    }

    #[target_feature(enable = "avx2,fma")]
    unsafe fn l2_avx2(a: &[f32], b: &[f32]) -> f32 {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        let pa = a.as_ptr();
        let pb = b.as_ptr();
        let mut acc0 = _mm256_setzero_ps();
        let mut acc1 = _mm256_setzero_ps();
        let mut i = 0;
        while i + 16 <= n {
            let d0 = _mm256_sub_ps(_mm256_loadu_ps(pa.add(i)), _mm256_loadu_ps(pb.add(i)));
            let d1 = _mm256_sub_ps(_mm256_loadu_ps(pa.add(i + 8)), _mm256_loadu_ps(pb.add(i + 8)));
            acc0 = _mm256_fmadd_ps(d0, d0, acc0);
            acc1 = _mm256_fmadd_ps(d1, d1, acc1);
            i += 16;
        }
        while i + 8 <= n {
            let d = _mm256_sub_ps(_mm256_loadu_ps(pa.add(i)), _mm256_loadu_ps(pb.add(i)));
            acc0 = _mm256_fmadd_ps(d, d, acc0);
            i += 8;
        }
        let mut sum = hsum(_mm256_add_ps(acc0, acc1));
        while i < n {
            let d = *pa.add(i) - *pb.add(i);
            sum += d * d;
            i += 1;
        }
        sum
    }

    #[target_feature(enable = "avx2,fma")]
    unsafe fn ip_avx2(a: &[f32], b: &[f32]) -> f32 {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        let pa = a.as_ptr();
        let pb = b.as_ptr();
        let mut acc0 = _mm256_setzero_ps();
        let mut acc1 = _mm256_setzero_ps();
        let mut i = 0;
        while i + 16 <= n {
            acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(pa.add(i)), _mm256_loadu_ps(pb.add(i)), acc0);
            acc1 = _mm256_fmadd_ps(
                _mm256_loadu_ps(pa.add(i + 8)),
                _mm256_loadu_ps(pb.add(i + 8)),
                acc1,
            );
            i += 16;
        }
        while i + 8 <= n {
            acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(pa.add(i)), _mm256_loadu_ps(pb.add(i)), acc0);
            i += 8;
        }
        let mut sum = hsum(_mm256_add_ps(acc0, acc1));
        while i < n {
            sum += *pa.add(i) * *pb.add(i);
            i += 1;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pythagorean() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0], Metric::L2Squared).unwrap(), 25.0);
    }

    #[test]
    fn identity_is_zero() {
        let v = [0.3f32, -1.5, 2.25, 7.0];
        assert_eq!(distance(&v, &v, Metric::L2Squared).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_is_negated() {
        assert_eq!(distance(&[1.0, 2.0], &[3.0, 4.0], Metric::InnerProduct).unwrap(), -11.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            distance(&[1.0], &[1.0, 2.0], Metric::L2Squared),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn metric_parse() {
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::L2Squared);
        assert_eq!("IP".parse::<Metric>().unwrap(), Metric::InnerProduct);
        assert!("cosine".parse::<Metric>().is_err());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
        (1usize..300).prop_flat_map(|d| {
            (
                prop::collection::vec(-1.0f32..1.0, d),
                prop::collection::vec(-1.0f32..1.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn optimized_matches_scalar((a, b) in vec_pair()) {
            for metric in [Metric::L2Squared, Metric::InnerProduct] {
                let reference = resolve(metric, Kernel::Scalar)(&a, &b) as f64;
                let fast = resolve(metric, Kernel::Optimized)(&a, &b) as f64;
                let unrolled = match metric {
                    Metric::L2Squared => l2_unrolled(&a, &b),
                    Metric::InnerProduct => neg_ip_unrolled(&a, &b),
                } as f64;
                // rounding error scales with the sum of term magnitudes
                let magnitude: f64 = match metric {
                    Metric::L2Squared => reference.abs(),
                    Metric::InnerProduct => a.iter().zip(&b).map(|(x, y)| (x * y).abs() as f64).sum(),
                };
                let tol = 1e-5 * magnitude.max(1e-1);
                prop_assert!((reference - fast).abs() <= tol, "{metric}: {reference} vs {fast}");
                prop_assert!((reference - unrolled).abs() <= tol, "{metric}: {reference} vs {unrolled}");
            }
        }

        #[test]
        fn l2_symmetric_and_reflexive((a, b) in vec_pair()) {
            for kernel in [Kernel::Scalar, Kernel::Optimized] {
                let f = resolve(Metric::L2Squared, kernel);
                prop_assert_eq!(f(&a, &b).to_bits(), f(&b, &a).to_bits());
                prop_assert_eq!(f(&a, &a), 0.0);
            }
        }
    }
}
