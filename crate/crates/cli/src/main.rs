//! `asyncann` — build graphs, compute ground truth and benchmark the
//! serial, path-wise and asynchronous search engines.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asyncann::io::{read_ivecs, write_ivecs};
use asyncann::report::{plot_table, to_csv, to_json, write_text};
use asyncann::suite::{parse_grid, AsyncKnobs, ReferenceCache};
use asyncann::{
    brute_force_topk, build_desk_index, load_graph, load_vectors, run_suite, save_graph, BuildParams, EngineKind,
    Error, GroundTruth, Metric, Result, SearchParams, SearchReport, SuiteConfig, VectorFormat, VectorStore, Workload,
};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{parse_l_list, stealing_modes, Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "asyncann", version, about = "Graph ANN search benchmark")]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph index and a sidecar JSON of its parameters.
    Build(Flags),
    /// Exact top-K neighbors of each query, written as ivecs.
    Groundtruth(Flags),
    /// Run an engine over a parallelism grid and emit reports.
    Search(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Build(f) => cmd_build(&file.overlay(f)),
        Command::Groundtruth(f) => cmd_groundtruth(&file.overlay(f)),
        Command::Search(f) => cmd_search(&file.overlay(f)),
    }
}

fn metric(cfg: &RunConfig) -> Result<Metric> {
    cfg.metric.as_deref().unwrap_or("l2").parse()
}

fn load(path: &Path, cfg: &RunConfig) -> Result<VectorStore> {
    let format = VectorFormat::from_path(path, cfg.raw_dim)?;
    load_vectors(path, format, metric(cfg)?)
}

#[derive(Serialize)]
struct BuildSidecar<'a> {
    vectors: &'a Path,
    metric: Metric,
    vertices: usize,
    dim: usize,
    edges: usize,
    entry_nodes: &'a [u32],
    build: BuildParams,
}

fn cmd_build(cfg: &RunConfig) -> Result<()> {
    let vectors = cfg.require(&cfg.vectors, "vectors")?;
    let out = cfg.require(&cfg.graph, "graph")?;
    let defaults = BuildParams::default();
    let params = BuildParams {
        max_degree: cfg.max_degree.unwrap_or(defaults.max_degree),
        build_beam: cfg.build_beam.unwrap_or(defaults.build_beam),
        alpha: cfg.alpha.unwrap_or(defaults.alpha),
        seed: cfg.seed.unwrap_or(defaults.seed),
    };
    let store = load(vectors, cfg)?;
    params.validate(store.len())?;
    let graph = build_desk_index(&store, &params)?;
    save_graph(&graph, out)?;
    let sidecar = BuildSidecar {
        vectors,
        metric: store.metric(),
        vertices: graph.vertex_count(),
        dim: store.dim(),
        edges: graph.edge_count(),
        entry_nodes: graph.entry_nodes(),
        build: params,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_text(&sidecar_path(out, "json"), &json)?;
    println!(
        "built {} vertices, {} edges, entry {:?} -> {}",
        graph.vertex_count(),
        graph.edge_count(),
        graph.entry_nodes(),
        out.display()
    );
    Ok(())
}

fn sidecar_path(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_groundtruth(cfg: &RunConfig) -> Result<()> {
    let store = load(cfg.require(&cfg.vectors, "vectors")?, cfg)?;
    let queries = load(cfg.require(&cfg.queries, "queries")?, cfg)?;
    let out = cfg.require(&cfg.groundtruth, "groundtruth")?;
    let k = cfg.k.unwrap_or(100);
    let gt = brute_force_topk(&store, &queries, k)?;
    write_ivecs(out, &gt.all_ids())?;
    println!("wrote top-{k} for {} queries -> {}", gt.len(), out.display());
    Ok(())
}

fn cmd_search(cfg: &RunConfig) -> Result<()> {
    // validate everything before loading data or spawning threads
    let engine: EngineKind = cfg.engine.as_deref().unwrap_or("serial").parse()?;
    let grid = parse_grid(cfg.grid.as_deref().unwrap_or("1x1"))?;
    let ls = parse_l_list(cfg.l.as_deref().unwrap_or("64"))?;
    let k = cfg.k.unwrap_or(10);
    let modes = if engine == EngineKind::Async {
        stealing_modes(cfg.stealing.as_deref())?
    } else {
        vec![true]
    };
    let debug = cfg.debug_invariants.unwrap_or(false);
    let mut configs = Vec::new();
    for &l in &ls {
        for &stealing in &modes {
            let mut sc = SuiteConfig::new(engine, grid.clone(), SearchParams::new(l, k).with_debug(debug));
            sc.width = cfg.width.unwrap_or(sc.width);
            sc.knobs = AsyncKnobs {
                groups: cfg.groups,
                discal: cfg.discal,
                stealing,
                inline_fraction: cfg.inline.unwrap_or(0.0),
                balancer: cfg.balancer.unwrap_or(false),
            };
            sc.repetitions = cfg.repetitions.unwrap_or(1);
            sc.warmup = cfg.warmup.unwrap_or(true);
            sc.recall_target = cfg.recall_target;
            sc.validate()?;
            configs.push(sc);
        }
    }

    let store = load(cfg.require(&cfg.vectors, "vectors")?, cfg)?;
    let queries = load(cfg.require(&cfg.queries, "queries")?, cfg)?;
    let graph_path = cfg.require(&cfg.graph, "graph")?;
    let graph = load_graph(graph_path)?;
    if graph.vertex_count() != store.len() {
        return Err(Error::Load {
            path: graph_path.to_path_buf(),
            offset: 0,
            reason: format!("graph has {} vertices, vectors file has {}", graph.vertex_count(), store.len()),
        });
    }
    let truth = match &cfg.groundtruth {
        Some(p) => Some(GroundTruth::from_ids(read_ivecs(p)?)?),
        None => None,
    };
    let workload = Workload {
        store: &store,
        graph: &graph,
        queries: &queries,
        truth: truth.as_ref(),
    };

    let mut cache = ReferenceCache::default();
    let mut reports: Vec<SearchReport> = Vec::new();
    for sc in &configs {
        reports.extend(run_suite(sc, &workload, &mut cache)?);
    }
    if let (Some(target), Some(&max_l)) = (cfg.recall_target, ls.iter().max()) {
        let best = reports
            .iter()
            .filter(|r| r.config.l == max_l)
            .filter_map(|r| r.aggregate.recall)
            .fold(f64::NAN, f64::max);
        if best < target {
            println!("target-missed: recall {best:.4} at L={max_l} is below {target}");
        }
    }
    print_table(&reports);

    if let Some(p) = &cfg.out_json {
        write_text(p, &to_json(&reports, cfg.per_query.unwrap_or(false))?)?;
        write_text(&sidecar_path(p, "run.toml"), &cfg.to_toml())?;
    }
    if let Some(p) = &cfg.out_csv {
        write_text(p, &to_csv(&reports))?;
    }
    if let Some(p) = &cfg.out_plot {
        write_text(p, &plot_table(&reports))?;
    }
    Ok(())
}

fn print_table(reports: &[SearchReport]) {
    println!(
        "{:<24} {:>5} {:>10} {:>11} {:>11} {:>8} {:>7}",
        "config", "L", "QPS", "mean_us", "p99_us", "recall", "RR"
    );
    for r in reports {
        let a = &r.aggregate;
        println!(
            "{:<24} {:>5} {:>10.1} {:>11.1} {:>11.1} {:>8} {:>7.4}{}",
            asyncann::report::config_name(r),
            r.config.l,
            a.qps,
            a.mean_latency_us,
            a.p99_latency_us,
            a.recall.map_or("-".to_string(), |v| format!("{v:.4}")),
            a.rr,
            if a.target_missed { "  target-missed" } else { "" }
        );
    }
}
