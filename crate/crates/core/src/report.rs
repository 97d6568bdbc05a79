//! Report emission: JSON (one object per configuration), CSV (one row per
//! configuration) and a plot-data table. Column names are stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::SearchReport;

pub const CSV_COLUMNS: &[&str] = &[
    "engine",
    "intra",
    "inter",
    "threads_per_query",
    "l",
    "k",
    "width",
    "groups",
    "discal",
    "stealing",
    "inline_fraction",
    "balancer",
    "queries",
    "passes",
    "qps",
    "mean_latency_us",
    "p50_latency_us",
    "p99_latency_us",
    "latency_pass_stddev_us",
    "recall",
    "rr",
    "logical_bandwidth_gbs",
    "effective_bandwidth_gbs",
    "frac_serial",
    "frac_expand",
    "frac_redundant",
    "frac_sync",
    "thread_seconds_per_second",
    "target_missed",
];

pub const PLOT_COLUMNS: &[&str] = &["config", "l", "mean_latency_us", "qps", "recall", "target_missed"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Short human label such as `async 2x4 G1C1`.
pub fn config_name(r: &SearchReport) -> String {
    let c = &r.config;
    let mut s = format!("{} {}x{}", c.engine, c.intra, c.inter);
    if let Some(w) = c.width {
        let _ = write!(s, " W{w}");
    }
    if let (Some(g), Some(d)) = (c.groups, c.discal) {
        let _ = write!(s, " G{g}C{d}");
    }
    s
}

pub fn to_csv(reports: &[SearchReport]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        let c = &r.config;
        let a = &r.aggregate;
        let row = [
            c.engine.clone(),
            c.intra.to_string(),
            c.inter.to_string(),
            c.threads_per_query.to_string(),
            c.l.to_string(),
            c.k.to_string(),
            opt(c.width),
            opt(c.groups),
            opt(c.discal),
            opt(c.stealing),
            opt(c.inline_fraction),
            opt(c.balancer),
            a.queries.to_string(),
            a.passes.to_string(),
            format!("{:.3}", a.qps),
            format!("{:.3}", a.mean_latency_us),
            format!("{:.3}", a.p50_latency_us),
            format!("{:.3}", a.p99_latency_us),
            format!("{:.3}", a.latency_pass_stddev_us),
            opt(a.recall.map(|v| format!("{v:.5}"))),
            format!("{:.5}", a.rr),
            format!("{:.4}", a.logical_bandwidth_gbs),
            format!("{:.4}", a.effective_bandwidth_gbs),
            format!("{:.4}", a.breakdown.serial),
            format!("{:.4}", a.breakdown.expand),
            format!("{:.4}", a.breakdown.redundant),
            format!("{:.4}", a.breakdown.sync),
            format!("{:.4}", a.thread_seconds_per_second),
            a.target_missed.to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// JSON array of reports; per-query records are dropped unless asked for.
pub fn to_json(reports: &[SearchReport], per_query: bool) -> Result<String> {
    let mut value = serde_json::to_value(reports).map_err(|e| Error::Invariant(format!("report encoding: {e}")))?;
    if !per_query {
        if let Some(items) = value.as_array_mut() {
            for item in items {
                if let Some(obj) = item.as_object_mut() {
                    obj.remove("per_query");
                }
            }
        }
    }
    serde_json::to_string_pretty(&value).map_err(|e| Error::Invariant(format!("report encoding: {e}")))
}

/// (config, latency, QPS, recall) per configuration, for external plotting.
pub fn plot_table(reports: &[SearchReport]) -> String {
    let mut out = PLOT_COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3},{},{}",
            config_name(r),
            r.config.l,
            a.mean_latency_us,
            a.qps,
            opt(a.recall.map(|v| format!("{v:.5}"))),
            a.target_missed
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Aggregate, BreakdownFractions, ConfigLabel};

    fn report(engine: &str) -> SearchReport {
        SearchReport {
            config: ConfigLabel {
                engine: engine.into(),
                intra: 2,
                inter: 4,
                l: 64,
                k: 10,
                threads_per_query: 2,
                width: None,
                groups: Some(1),
                discal: Some(1),
                stealing: Some(true),
                inline_fraction: Some(0.0),
                balancer: Some(false),
            },
            aggregate: Aggregate {
                queries: 5,
                passes: 1,
                qps: 100.0,
                mean_latency_us: 20.0,
                p50_latency_us: 19.0,
                p99_latency_us: 30.0,
                latency_pass_stddev_us: 0.0,
                recall: Some(0.95),
                rr: 0.1,
                logical_bandwidth_gbs: 1.0,
                effective_bandwidth_gbs: 0.9,
                breakdown: BreakdownFractions {
                    serial: 0.1,
                    expand: 0.6,
                    redundant: 0.1,
                    sync: 0.2,
                },
                thread_seconds_per_second: 4.0,
                wall_seconds: 0.05,
                target_missed: false,
            },
            per_query: Vec::new(),
        }
    }

    #[test]
    fn csv_has_one_row_per_config_and_stable_header() {
        let csv = to_csv(&[report("async"), report("serial")]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("engine,intra,inter,threads_per_query,l,k,"));
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), CSV_COLUMNS.len());
        }
    }

    #[test]
    fn json_round_trips_field_names() {
        let text = to_json(&[report("async")], false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["aggregate"]["recall"], 0.95);
        assert_eq!(v[0]["config"]["engine"], "async");
        assert!(v[0].get("per_query").is_none());
    }

    #[test]
    fn plot_table_rows() {
        let t = plot_table(&[report("async")]);
        assert_eq!(t.lines().nth(1).unwrap(), "async 2x4 G1C1,64,20.000,100.000,0.95000,false");
    }
}
