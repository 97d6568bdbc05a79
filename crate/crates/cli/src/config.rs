//! Run configuration: CLI flags over an optional TOML file over defaults.

use std::path::{Path, PathBuf};

use asyncann::{Error, Result};
use clap::{ArgAction, Args};
use serde::{Deserialize, Serialize};

/// Every setting of every subcommand. File keys use the flag names with
/// dashes replaced by underscores (`L`/`K` may be written lowercase).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub vectors: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub groundtruth: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub metric: Option<String>,
    pub raw_dim: Option<usize>,
    pub engine: Option<String>,
    pub grid: Option<String>,
    #[serde(alias = "L")]
    pub l: Option<String>,
    #[serde(alias = "K")]
    pub k: Option<usize>,
    pub width: Option<usize>,
    pub groups: Option<usize>,
    pub discal: Option<usize>,
    pub stealing: Option<String>,
    pub inline: Option<f32>,
    pub balancer: Option<bool>,
    pub seed: Option<u64>,
    pub max_degree: Option<usize>,
    pub build_beam: Option<usize>,
    pub alpha: Option<f32>,
    pub repetitions: Option<usize>,
    pub warmup: Option<bool>,
    pub recall_target: Option<f64>,
    pub out_json: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
    pub out_plot: Option<PathBuf>,
    pub per_query: Option<bool>,
    pub debug_invariants: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Base vectors (.fvecs, .bvecs, or raw f32 with --raw-dim).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Ground-truth ivecs (read by search, written by groundtruth).
    #[arg(long)]
    pub groundtruth: Option<PathBuf>,
    /// Graph file (written by build, read by search).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// l2 or ip.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub raw_dim: Option<usize>,
    /// serial, pathwise or async.
    #[arg(long)]
    pub engine: Option<String>,
    /// Comma-separated INTRAxINTER cells, e.g. 1x8,2x4,4x2.
    #[arg(long)]
    pub grid: Option<String>,
    /// Queue capacity; a comma-separated list sweeps several values.
    #[arg(long = "L")]
    pub l: Option<String>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Path-wise expansions per thread per epoch.
    #[arg(long)]
    pub width: Option<usize>,
    /// Async thread groups per query.
    #[arg(long)]
    pub groups: Option<usize>,
    /// Async distance calculators per group.
    #[arg(long)]
    pub discal: Option<usize>,
    /// on, off or both (one row set each).
    #[arg(long, num_args = 0..=1, default_missing_value = "on")]
    pub stealing: Option<String>,
    /// Fraction of missing distances a maintainer computes inline.
    #[arg(long)]
    pub inline: Option<f32>,
    /// Run a dedicated balancer thread.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub balancer: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub build_beam: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f32>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub warmup: Option<bool>,
    /// Flag configurations whose recall falls below this.
    #[arg(long)]
    pub recall_target: Option<f64>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Plot-data table (config, L, latency, QPS, recall).
    #[arg(long)]
    pub out_plot: Option<PathBuf>,
    /// Include per-query records in the JSON report.
    #[arg(long, action = ArgAction::SetTrue)]
    pub per_query: bool,
    /// Check queue, ownership and board invariants; violations exit 3.
    #[arg(long, action = ArgAction::SetTrue)]
    pub debug_invariants: bool,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::usage(format!("{}: {}", path.display(), e.message())))
    }

    /// Flags take precedence over `self` (the file layer).
    pub fn overlay(self, f: Flags) -> Self {
        Self {
            vectors: f.vectors.or(self.vectors),
            queries: f.queries.or(self.queries),
            groundtruth: f.groundtruth.or(self.groundtruth),
            graph: f.graph.or(self.graph),
            metric: f.metric.or(self.metric),
            raw_dim: f.raw_dim.or(self.raw_dim),
            engine: f.engine.or(self.engine),
            grid: f.grid.or(self.grid),
            l: f.l.or(self.l),
            k: f.k.or(self.k),
            width: f.width.or(self.width),
            groups: f.groups.or(self.groups),
            discal: f.discal.or(self.discal),
            stealing: f.stealing.or(self.stealing),
            inline: f.inline.or(self.inline),
            balancer: f.balancer.or(self.balancer),
            seed: f.seed.or(self.seed),
            max_degree: f.max_degree.or(self.max_degree),
            build_beam: f.build_beam.or(self.build_beam),
            alpha: f.alpha.or(self.alpha),
            repetitions: f.repetitions.or(self.repetitions),
            warmup: f.warmup.or(self.warmup),
            recall_target: f.recall_target.or(self.recall_target),
            out_json: f.out_json.or(self.out_json),
            out_csv: f.out_csv.or(self.out_csv),
            out_plot: f.out_plot.or(self.out_plot),
            per_query: f.per_query.then_some(true).or(self.per_query),
            debug_invariants: f.debug_invariants.then_some(true).or(self.debug_invariants),
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::usage(format!("--{flag} is required")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

/// `on`/`off`/`both` to the stealing settings to run.
pub fn stealing_modes(s: Option<&str>) -> Result<Vec<bool>> {
    match s.map(str::to_ascii_lowercase).as_deref() {
        None | Some("on") | Some("true") => Ok(vec![true]),
        Some("off") | Some("false") => Ok(vec![false]),
        Some("both") => Ok(vec![true, false]),
        Some(other) => Err(Error::usage(format!("--stealing expects on, off or both, got '{other}'"))),
    }
}

pub fn parse_l_list(s: &str) -> Result<Vec<usize>> {
    let v: std::result::Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match v {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::usage(format!("--L expects integers, got '{s}'"))),
    }
}
