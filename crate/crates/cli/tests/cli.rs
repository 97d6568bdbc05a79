use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asyncann::io::{read_ivecs, write_fvecs};
use asyncann::synth::MixtureSpec;
use asyncann::{Metric, VectorStore};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asyncann"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    base: PathBuf,
    queries: PathBuf,
}

impl Fixture {
    fn new(n: usize, dim: usize, nq: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let spec = MixtureSpec::new(dim, 5);
        let base = dir.path().join("base.fvecs");
        let queries = dir.path().join("query.fvecs");
        write_fvecs(&base, &VectorStore::new(spec.sample(n, 1), dim, Metric::L2Squared).unwrap()).unwrap();
        write_fvecs(&queries, &VectorStore::new(spec.sample(nq, 2), dim, Metric::L2Squared).unwrap()).unwrap();
        Self { dir, base, queries }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn build(&self, graph: &Path, extra: &[&str]) -> Output {
        let mut args = vec!["build", "--vectors", p(&self.base), "--graph", p(graph)];
        if !extra.contains(&"--max-degree") {
            args.extend_from_slice(&["--max-degree", "16", "--build-beam", "32"]);
        }
        args.extend_from_slice(extra);
        run(&args)
    }

    fn groundtruth(&self, k: &str) -> PathBuf {
        let gt = self.path("gt.ivecs");
        let out = run(&["groundtruth", "--vectors", p(&self.base), "--queries", p(&self.queries), "--groundtruth", p(&gt), "--K", k]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        gt
    }

    fn search(&self, graph: &Path, gt: &Path, extra: &[&str]) -> Output {
        let mut args = vec![
            "search",
            "--vectors",
            p(&self.base),
            "--queries",
            p(&self.queries),
            "--graph",
            p(graph),
            "--groundtruth",
            p(gt),
            "--warmup",
            "false",
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_is_deterministic_and_writes_sidecar() {
    let f = Fixture::new(1000, 16, 10);
    let (a, b) = (f.path("a.graph"), f.path("b.graph"));
    assert!(f.build(&a, &["--seed", "7"]).status.success());
    assert!(f.build(&b, &["--seed", "7"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let side = json(&f.path("a.graph.json"));
    assert_eq!(side["build"]["seed"], 7);
    assert_eq!(side["vertices"], 1000);
}

#[test]
fn degree_above_n_minus_one_is_usage_error() {
    let f = Fixture::new(20, 4, 2);
    let out = f.build(&f.path("g"), &["--max-degree", "20", "--build-beam", "40"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage error"));
}

#[test]
fn serial_search_after_build_reaches_high_recall() {
    let f = Fixture::new(1000, 16, 100);
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let report = f.path("r.json");
    let out = f.search(&g, &gt, &["--engine", "serial", "--L", "64", "--K", "10", "--out-json", p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&report);
    let recall = v[0]["aggregate"]["recall"].as_f64().unwrap();
    assert!(recall >= 0.99, "recall {recall}");
    assert!(f.path("r.json.run.toml").exists());
}

#[test]
fn groundtruth_small_example_and_errors() {
    let dir = TempDir::new().unwrap();
    let base = dir.path().join("b.fvecs");
    let q = dir.path().join("q.fvecs");
    let gt = dir.path().join("gt.ivecs");
    write_fvecs(&base, &VectorStore::from_rows(&[vec![0.0], vec![1.0], vec![5.0]], Metric::L2Squared).unwrap()).unwrap();
    write_fvecs(&q, &VectorStore::from_rows(&[vec![0.9]], Metric::L2Squared).unwrap()).unwrap();
    let out = run(&["groundtruth", "--vectors", p(&base), "--queries", p(&q), "--groundtruth", p(&gt), "--K", "2"]);
    assert!(out.status.success());
    assert_eq!(read_ivecs(&gt).unwrap(), vec![vec![1, 0]]);
    let out = run(&["groundtruth", "--vectors", p(&base), "--queries", p(&q), "--groundtruth", p(&gt), "--K", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn groundtruth_matches_quadratic_scan() {
    let f = Fixture::new(100, 16, 7);
    let gt = read_ivecs(f.groundtruth("5")).unwrap();
    let base = asyncann::load_vectors(&f.base, asyncann::VectorFormat::Fvecs, Metric::L2Squared).unwrap();
    let queries = asyncann::load_vectors(&f.queries, asyncann::VectorFormat::Fvecs, Metric::L2Squared).unwrap();
    for (qi, q) in queries.rows().enumerate() {
        let mut all: Vec<(f32, u32)> = (0..100u32)
            .map(|i| (base.vector(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<u32> = all[..5].iter().map(|x| x.1).collect();
        assert_eq!(gt[qi], want);
    }
}

#[test]
fn grid_gives_one_row_per_cell_and_ablation_rows() {
    let f = Fixture::new(600, 8, 20);
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let csv = f.path("r.csv");
    let plot = f.path("plot.csv");
    let out = f.search(
        &g,
        &gt,
        &["--engine", "async", "--grid", "1x8,2x4,4x2", "--L", "32", "--out-csv", p(&csv), "--out-plot", p(&plot)],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
    assert_eq!(std::fs::read_to_string(&plot).unwrap().lines().count(), 4);

    let out = f.search(&g, &gt, &["--engine", "async", "--grid", "4x1", "--L", "32", "--stealing", "both", "--out-csv", p(&csv)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",true,") && rows[1].contains(",false,"));
}

#[test]
fn degenerate_async_matches_serial_ids() {
    let f = Fixture::new(600, 8, 25);
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let (a, b) = (f.path("serial.json"), f.path("async.json"));
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(f.search(&g, &gt, &["--engine", "serial", "--per-query", "--out-json", p(&a)]));
    ok(f.search(
        &g,
        &gt,
        &["--engine", "async", "--groups", "1", "--discal", "0", "--per-query", "--out-json", p(&b), "--debug-invariants"],
    ));
    let ids = |v: &Value| -> Vec<Value> { v[0]["per_query"].as_array().unwrap().iter().map(|q| q["ids"].clone()).collect() };
    assert_eq!(ids(&json(&a)), ids(&json(&b)));
}

#[test]
fn sidecar_config_reproduces_serial_run() {
    let f = Fixture::new(500, 8, 15);
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let first = f.path("first.json");
    assert!(f.search(&g, &gt, &["--L", "40", "--per-query", "--out-json", p(&first)]).status.success());
    let second = f.path("second.json");
    let sidecar = f.path("first.json.run.toml");
    let out = run(&["search", "--config", p(&sidecar), "--out-json", p(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ids = |v: Value| v[0]["per_query"].as_array().unwrap().iter().map(|q| q["ids"].clone()).collect::<Vec<_>>();
    assert_eq!(ids(json(&first)), ids(json(&second)));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let f = Fixture::new(300, 8, 5);
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let cfg = f.path("c.toml");
    std::fs::write(&cfg, "engine = \"pathwise\"\ngrid = \"2x1\"\nL = \"24\"\n").unwrap();
    let csv = f.path("r.csv");
    let out = f.search(&g, &gt, &["--config", p(&cfg), "--L", "30", "--out-csv", p(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("pathwise,2,1,2,30,"), "{row}");

    std::fs::write(&cfg, "engnie = \"async\"\n").unwrap();
    let out = f.search(&g, &gt, &["--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_for_usage_and_data_errors() {
    assert_eq!(run(&["search", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let f = Fixture::new(300, 8, 5);
    let bad = f.path("bad.fvecs");
    std::fs::write(&bad, [3u8, 0, 0, 0, 1, 2]).unwrap();
    let out = run(&["build", "--vectors", p(&bad), "--graph", p(&f.path("g"))]);
    assert_eq!(out.status.code(), Some(2));
    let g = f.path("g");
    assert!(f.build(&g, &[]).status.success());
    let gt = f.groundtruth("10");
    let out = f.search(&g, &gt, &["--engine", "serial", "--grid", "2x1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = f.search(&g, &gt, &["--engine", "warp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_recall_target_is_flagged_not_failed() {
    let f = Fixture::new(400, 8, 10);
    let g = f.path("g");
    assert!(f.build(&g, &["--max-degree", "4", "--build-beam", "8"]).status.success());
    let gt = f.groundtruth("10");
    let csv = f.path("r.csv");
    let out = f.search(&g, &gt, &["--L", "10", "--recall-target", "1.01", "--out-csv", p(&csv)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("target-missed"));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().nth(1).unwrap().ends_with(",true"));
}
