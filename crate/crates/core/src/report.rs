//! CSV and summary file emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::{aggregate, MetricsSummary};
use crate::scalar::Scalar;
use crate::sim::SimResult;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub const TRACE_HEADER: &str = "t_s,load_coord_kw,load_base_kw,active_count,agreement";

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Trace CSV text: one row per tick, kW to three decimals, LF endings.
pub fn format_trace_csv<T: Scalar>(result: &SimResult<T>) -> String {
    let tick = result.coordinated.tick_s;
    let mut out = String::with_capacity(32 * (result.tick_count() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for i in 0..result.tick_count() {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{},{}",
            i as u64 * tick,
            result.coordinated.samples[i],
            result.baseline.samples[i],
            result.active_count[i],
            result.agreement[i] as u8
        );
    }
    out
}

pub fn emit_csv<T: Scalar>(result: &SimResult<T>, path: &Path) -> Result<(), ReportError> {
    write_file(path, &format_trace_csv(result))
}

/// One parsed trace row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t_s: u64,
    pub load_coord_kw: f64,
    pub load_base_kw: f64,
    pub active_count: u32,
    pub agreement: bool,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, ReportError> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(ReportError::Parse { line: 1, message: "unexpected header".into() });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| ReportError::Parse { line: i + 2, message: format!("bad {what}") };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("field count"));
            }
            Ok(TraceRow {
                t_s: f[0].parse().map_err(|_| bad("t_s"))?,
                load_coord_kw: f[1].parse().map_err(|_| bad("load_coord_kw"))?,
                load_base_kw: f[2].parse().map_err(|_| bad("load_base_kw"))?,
                active_count: f[3].parse().map_err(|_| bad("active_count"))?,
                agreement: match f[4] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("agreement")),
                },
            })
        })
        .collect()
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "na".to_string(), |x| format!("{x:.3}"))
}

/// `key=value` summary: per-seed metrics followed by median/mean/max across
/// seeds for each percentage.
pub fn format_summary<T: Scalar>(summaries: &[MetricsSummary<T>]) -> String {
    assert!(!summaries.is_empty(), "summary needs at least one run");
    let mut out = String::new();
    let _ = writeln!(out, "runs={}", summaries.len());
    for s in summaries {
        let p = format!("seed.{}", s.seed);
        for (mode, st) in [("coord", &s.coordinated), ("base", &s.baseline)] {
            let _ = writeln!(out, "{p}.peak_{mode}_kw={:.3}", st.peak_kw);
            let _ = writeln!(out, "{p}.mean_{mode}_kw={:.3}", st.mean_kw);
            let _ = writeln!(out, "{p}.stddev_{mode}_kw={:.3}", st.stddev_kw);
        }
        let _ = writeln!(out, "{p}.peak_reduction_pct={}", fmt_opt(s.peak_reduction_pct));
        let _ = writeln!(out, "{p}.stddev_reduction_pct={}", fmt_opt(s.stddev_reduction_pct));
        let _ = writeln!(out, "{p}.mean_delta_pct={}", fmt_opt(s.mean_delta_pct));
    }
    type Pick<T> = fn(&MetricsSummary<T>) -> Option<T>;
    let metrics: [(&str, Pick<T>); 3] = [
        ("peak_reduction_pct", |s| s.peak_reduction_pct),
        ("stddev_reduction_pct", |s| s.stddev_reduction_pct),
        ("mean_delta_pct", |s| s.mean_delta_pct),
    ];
    for (name, pick) in metrics {
        let agg = aggregate(summaries.iter().map(pick));
        let _ = writeln!(out, "{name}.median={}", fmt_opt(agg.map(|a| a.median)));
        let _ = writeln!(out, "{name}.mean={}", fmt_opt(agg.map(|a| a.mean)));
        let _ = writeln!(out, "{name}.max={}", fmt_opt(agg.map(|a| a.max)));
    }
    out
}

pub fn emit_summary<T: Scalar>(summaries: &[MetricsSummary<T>], path: &Path) -> Result<(), ReportError> {
    write_file(path, &format_summary(summaries))
}
