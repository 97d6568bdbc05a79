//! Python bindings: vector stores, graph build/load, the three search
//! engines, ground truth and the threshold estimator.

use std::path::PathBuf;

use asyncann::asynch::estimate_l_threshold;
use asyncann::io::write_fvecs;
use asyncann::{
    async_search as async_search_rs, bfis_search as bfis_search_rs, brute_force_topk as brute_force_topk_rs,
    build_desk_index, load_graph, load_vectors, pathwise_search as pathwise_search_rs, recall_at_k as recall_rs,
    save_graph, AsyncParams, BuildParams, Error, GroundTruth, Metric, PathwiseParams, SearchParams, VectorFormat,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Usage(_) => PyValueError::new_err(e.to_string()),
        Error::Load { .. } | Error::Graph { .. } | Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_metric(metric: &str) -> PyResult<Metric> {
    metric.parse().map_err(to_py)
}

#[pyclass(frozen)]
struct VectorStore {
    inner: asyncann::VectorStore,
}

#[pymethods]
impl VectorStore {
    /// From a list of equal-length rows.
    #[new]
    #[pyo3(signature = (rows, metric = "l2"))]
    fn new(rows: Vec<Vec<f32>>, metric: &str) -> PyResult<Self> {
        let inner = asyncann::VectorStore::from_rows(&rows, parse_metric(metric)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads .fvecs/.bvecs, or raw f32 when `raw_dim` is given.
    #[staticmethod]
    #[pyo3(signature = (path, metric = "l2", raw_dim = None))]
    fn load(path: PathBuf, metric: &str, raw_dim: Option<usize>) -> PyResult<Self> {
        let format = VectorFormat::from_path(&path, raw_dim).map_err(to_py)?;
        let inner = load_vectors(&path, format, parse_metric(metric)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save_fvecs(&self, path: PathBuf) -> PyResult<()> {
        write_fvecs(path, &self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn metric(&self) -> String {
        self.inner.metric().to_string()
    }

    fn vector(&self, id: u32) -> PyResult<Vec<f32>> {
        if id as usize >= self.inner.len() {
            return Err(PyValueError::new_err(format!("id {id} out of range")));
        }
        Ok(self.inner.vector(id).to_vec())
    }

    fn distance_to(&self, query: Vec<f32>, id: u32) -> PyResult<f32> {
        check_query(&self.inner, &query)?;
        if id as usize >= self.inner.len() {
            return Err(PyValueError::new_err(format!("id {id} out of range")));
        }
        Ok(self.inner.distance_to(&query, id))
    }
}

fn check_query(store: &asyncann::VectorStore, q: &[f32]) -> PyResult<()> {
    if q.len() != store.dim() {
        return Err(PyValueError::new_err(format!(
            "query has dimension {}, store has {}",
            q.len(),
            store.dim()
        )));
    }
    Ok(())
}

#[pyclass(frozen)]
struct GraphIndex {
    inner: asyncann::GraphIndex,
}

#[pymethods]
impl GraphIndex {
    #[staticmethod]
    #[pyo3(signature = (store, max_degree = 32, build_beam = 64, alpha = 1.2, seed = 7))]
    fn build(
        py: Python<'_>,
        store: &VectorStore,
        max_degree: usize,
        build_beam: usize,
        alpha: f32,
        seed: u64,
    ) -> PyResult<Self> {
        let params = BuildParams {
            max_degree,
            build_beam,
            alpha,
            seed,
        };
        let inner = py.detach(|| build_desk_index(&store.inner, &params)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// From adjacency lists.
    #[staticmethod]
    fn from_adjacency(lists: Vec<Vec<u32>>, entry_nodes: Vec<u32>, max_degree: u32) -> PyResult<Self> {
        let inner = asyncann::GraphIndex::from_adjacency(&lists, entry_nodes, max_degree).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_graph(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_graph(&self.inner, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn entry_nodes(&self) -> Vec<u32> {
        self.inner.entry_nodes().to_vec()
    }

    #[getter]
    fn max_degree(&self) -> u32 {
        self.inner.max_degree()
    }

    fn neighbors(&self, v: u32) -> PyResult<Vec<u32>> {
        if v as usize >= self.inner.vertex_count() {
            return Err(PyValueError::new_err(format!("vertex {v} out of range")));
        }
        Ok(self.inner.neighbors(v).to_vec())
    }
}

/// Result of one search.
#[pyclass(frozen, get_all)]
struct SearchResult {
    ids: Vec<u32>,
    dists: Vec<f32>,
    /// Expanded vertices; per thread (or group) for the parallel engines.
    traces: Vec<Vec<u32>>,
    dist_evals: u64,
    expansions: u64,
    bytes_touched: u64,
}

#[pymethods]
impl SearchResult {
    fn __repr__(&self) -> String {
        format!(
            "SearchResult(ids={:?}, expansions={}, dist_evals={})",
            self.ids, self.expansions, self.dist_evals
        )
    }
}

fn result(results: &[asyncann::Neighbor], traces: Vec<Vec<u32>>, stats: asyncann::SearchStats) -> SearchResult {
    SearchResult {
        ids: results.iter().map(|n| n.id).collect(),
        dists: results.iter().map(|n| n.dist).collect(),
        traces,
        dist_evals: stats.dist_evals,
        expansions: stats.expansions,
        bytes_touched: stats.bytes_touched,
    }
}

#[pyfunction]
#[pyo3(name = "bfis_search", signature = (query, graph, store, l, k, debug = false))]
fn bfis_search(
    py: Python<'_>,
    query: Vec<f32>,
    graph: &GraphIndex,
    store: &VectorStore,
    l: usize,
    k: usize,
    debug: bool,
) -> PyResult<SearchResult> {
    check_query(&store.inner, &query)?;
    let params = SearchParams::new(l, k).with_debug(debug);
    let out = py
        .detach(|| bfis_search_rs(&query, &graph.inner, &store.inner, &params))
        .map_err(to_py)?;
    Ok(result(&out.results, vec![out.trace.ids()], out.stats))
}

#[pyfunction]
#[pyo3(name = "pathwise_search", signature = (query, graph, store, l, k, threads = 2, width = 4, debug = false))]
#[allow(clippy::too_many_arguments)]
fn pathwise_search(
    py: Python<'_>,
    query: Vec<f32>,
    graph: &GraphIndex,
    store: &VectorStore,
    l: usize,
    k: usize,
    threads: usize,
    width: usize,
    debug: bool,
) -> PyResult<SearchResult> {
    check_query(&store.inner, &query)?;
    let params = PathwiseParams::new(threads, width, SearchParams::new(l, k).with_debug(debug));
    let out = py
        .detach(|| pathwise_search_rs(&query, &graph.inner, &store.inner, &params))
        .map_err(to_py)?;
    let traces = out.thread_traces.iter().map(|t| t.ids()).collect();
    Ok(result(&out.results, traces, out.stats))
}

#[pyfunction]
#[pyo3(name = "async_search", signature = (
    query, graph, store, l, k, groups = 1, discal = 1, stealing = true,
    inline_fraction = 0.0, balancer = false, debug = false
))]
#[allow(clippy::too_many_arguments)]
fn async_search(
    py: Python<'_>,
    query: Vec<f32>,
    graph: &GraphIndex,
    store: &VectorStore,
    l: usize,
    k: usize,
    groups: usize,
    discal: usize,
    stealing: bool,
    inline_fraction: f32,
    balancer: bool,
    debug: bool,
) -> PyResult<SearchResult> {
    check_query(&store.inner, &query)?;
    let params = AsyncParams::new(groups, discal, SearchParams::new(l, k).with_debug(debug))
        .with_stealing(stealing)
        .with_inline(inline_fraction)
        .with_balancer(balancer);
    let out = py
        .detach(|| async_search_rs(&query, &graph.inner, &store.inner, &params))
        .map_err(to_py)?;
    if let Some(v) = out.violations.first() {
        return Err(PyRuntimeError::new_err(format!("invariant violated: {v}")));
    }
    let traces = out.group_traces.iter().map(|t| t.ids()).collect();
    Ok(result(&out.results, traces, out.stats))
}

/// Exact top-k ids of every query row.
#[pyfunction]
#[pyo3(name = "brute_force_topk")]
fn brute_force_topk(py: Python<'_>, store: &VectorStore, queries: &VectorStore, k: usize) -> PyResult<Vec<Vec<u32>>> {
    let gt = py
        .detach(|| brute_force_topk_rs(&store.inner, &queries.inner, k))
        .map_err(to_py)?;
    Ok(gt.all_ids())
}

#[pyfunction]
#[pyo3(name = "recall_at_k")]
fn recall_at_k(results: Vec<Vec<u32>>, truth: Vec<Vec<u32>>, k: usize) -> PyResult<f64> {
    let gt = GroundTruth::from_ids(truth).map_err(to_py)?;
    recall_rs(&results, &gt, k).map_err(to_py)
}

/// L-th smallest distance over sorted snapshots; +inf when they hold at
/// most L entries.
#[pyfunction]
#[pyo3(name = "estimate_l_threshold")]
fn l_threshold(snapshots: Vec<Vec<f32>>, l: usize) -> PyResult<f32> {
    if snapshots.iter().any(|s| s.windows(2).any(|w| w[0] > w[1])) {
        return Err(PyValueError::new_err("snapshots must be sorted ascending"));
    }
    Ok(estimate_l_threshold(&snapshots, l))
}

#[pyfunction]
#[pyo3(signature = (a, b, metric = "l2"))]
fn distance(a: Vec<f32>, b: Vec<f32>, metric: &str) -> PyResult<f32> {
    asyncann::distance(&a, &b, parse_metric(metric)?).map_err(to_py)
}

#[pymodule]
fn asyncann_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<VectorStore>()?;
    m.add_class::<GraphIndex>()?;
    m.add_class::<SearchResult>()?;
    m.add_function(wrap_pyfunction!(bfis_search, m)?)?;
    m.add_function(wrap_pyfunction!(pathwise_search, m)?)?;
    m.add_function(wrap_pyfunction!(async_search, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_topk, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(l_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    Ok(())
}
