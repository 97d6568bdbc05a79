//! Graph-based approximate nearest neighbor search with three engines that
//! share one graph and one vector store:
//!
//! * [`serial`]: best-first search, the correctness reference;
//! * [`pathwise`]: fork-join path-wise parallel search with a fixed
//!   per-epoch expansion width;
//! * [`asynch`]: fully asynchronous search where queue maintainers,
//!   distance calculators and a threshold balancer never wait on each other.
//!
//! [`metrics`] and [`suite`] measure recall, redundant expansions, latency,
//! throughput and time breakdowns across engines.

pub mod asynch;
pub mod build;
pub mod distance;
pub mod error;
pub mod graph;
pub mod groundtruth;
pub mod io;
pub mod metrics;
pub mod neighbor;
pub mod pathwise;
pub mod queue;
pub mod report;
pub mod serial;
pub mod store;
pub mod suite;
pub mod synth;
pub mod testgraph;
pub mod visit;

pub use asynch::{async_search, AsyncOutcome, AsyncParams, AsyncSearcher};
pub use build::{build_desk_index, medoid, BuildParams};
pub use distance::{distance, Kernel, Metric};
pub use error::{Error, Result};
pub use graph::{load_graph, save_graph, GraphIndex};
pub use groundtruth::{brute_force_topk, GroundTruth};
pub use io::{load_vectors, VectorFormat};
pub use metrics::{recall_at_k, redundant_ratio, SearchReport};
pub use neighbor::Neighbor;
pub use pathwise::{pathwise_search, PathwiseOutcome, PathwiseParams, PathwiseSearcher};
pub use serial::{bfis_search, ExpansionTrace, SearchOutcome, SearchParams, SearchStats};
pub use store::VectorStore;
pub use suite::{run_suite, EngineKind, SuiteConfig, Workload};
