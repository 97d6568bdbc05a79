use crate::distance::{resolve, DistanceFn, Kernel, Metric};
use crate::error::{Error, Result};

/// Dense row-major matrix of `count` vectors of dimension `dim`.
///
/// Immutable after construction; all search engines share one store by
/// reference across threads.
#[derive(Clone)]
pub struct VectorStore {
    count: usize,
    dim: usize,
    data: Vec<f32>,
    metric: Metric,
    kernel: Kernel,
    dist_fn: DistanceFn,
}

impl std::fmt::Debug for VectorStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorStore")
            .field("count", &self.count)
            .field("dim", &self.dim)
            .field("metric", &self.metric)
            .field("kernel", &self.kernel)
            .finish()
    }
}

impl VectorStore {
    /// Builds a store from a flat row-major buffer. Rejects empty input,
    /// ragged lengths and non-finite components.
    pub fn new(data: Vec<f32>, dim: usize, metric: Metric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("dimension must be >= 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::usage(format!(
                "buffer of {} floats is not a non-empty multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite component in vector {} (dim {})",
                pos / dim,
                pos % dim
            )));
        }
        let count = data.len() / dim;
        if count > u32::MAX as usize / 2 {
            return Err(Error::usage("vertex count exceeds 2^31"));
        }
        Ok(Self {
            count,
            dim,
            data,
            metric,
            kernel: Kernel::Optimized,
            dist_fn: resolve(metric, Kernel::Optimized),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], metric: Metric) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::usage("rows have differing dimensions"));
        }
        Self::new(rows.concat(), dim, metric)
    }

    /// Switches the distance kernel, e.g. to the scalar reference.
    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self.dist_fn = resolve(self.metric, kernel);
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self.dist_fn = resolve(metric, self.kernel);
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn vector(&self, id: u32) -> &[f32] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Distance from `query` to stored vector `id`.
    #[inline]
    pub fn distance_to(&self, query: &[f32], id: u32) -> f32 {
        debug_assert_eq!(query.len(), self.dim);
        (self.dist_fn)(query, self.vector(id))
    }

    #[inline]
    pub fn distance_between(&self, a: u32, b: u32) -> f32 {
        (self.dist_fn)(self.vector(a), self.vector(b))
    }

    /// Raw kernel for callers comparing arbitrary slices.
    #[inline]
    pub fn distance_fn(&self) -> DistanceFn {
        self.dist_fn
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Bytes read by one distance evaluation against a stored vector.
    pub fn vector_bytes(&self) -> u64 {
        (self.dim * std::mem::size_of::<f32>()) as u64
    }
}
