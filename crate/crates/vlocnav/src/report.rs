//! Summary CSV, tables and plot data from a sweep result.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlocnav_core::bench::{failure_rate, recall, success_rate, FailureCause, RecallThresholds};

use crate::svg;
use crate::sweep::{PointResult, SweepResult, BASELINE_METHOD};
use crate::{FormatError, ReportError};

/// One row of `summary.csv`. Recall is empty for the baseline, which never
/// localizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis_value: String,
    pub method: String,
    pub failure_rate: f64,
    #[serde(rename = "recall_T1")]
    pub recall_t1: Option<f64>,
    #[serde(rename = "recall_T2")]
    pub recall_t2: Option<f64>,
    #[serde(rename = "recall_T3")]
    pub recall_t3: Option<f64>,
    pub success_rate: f64,
    pub episodes: usize,
}

fn row(p: &PointResult, km: f64, thresholds: &RecallThresholds) -> SummaryRow {
    let r = (p.method != BASELINE_METHOD).then(|| recall(&p.reference, thresholds));
    SummaryRow {
        axis_value: p.axis_value.clone(),
        method: p.method.clone(),
        failure_rate: failure_rate(&p.episodes, km),
        recall_t1: r.map(|r| r[0]),
        recall_t2: r.map(|r| r[1]),
        recall_t3: r.map(|r| r[2]),
        success_rate: if p.episodes.is_empty() { 0.0 } else { success_rate(&p.episodes) },
        episodes: p.episodes.len(),
    }
}

/// Rows for every complete point, then the baseline row.
pub fn summarize(result: &SweepResult, thresholds: &RecallThresholds) -> Result<Vec<SummaryRow>, ReportError> {
    let baseline = result.baseline.as_ref().filter(|b| b.error.is_none() && !b.episodes.is_empty());
    let Some(baseline) = baseline else { return Err(ReportError::MissingBaseline) };
    let mut rows: Vec<SummaryRow> = result
        .points
        .iter()
        .filter(|p| p.error.is_none() && !p.episodes.is_empty())
        .map(|p| row(p, result.route_length_km, thresholds))
        .collect();
    if rows.is_empty() {
        return Err(ReportError::NoPoints);
    }
    rows.push(row(baseline, result.route_length_km, thresholds));
    Ok(rows)
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn raw_csv(header: &[String], rows: &[Vec<String>]) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, FormatError> {
    csv_string(rows)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>, FormatError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt)
}

/// Methods in order of first appearance, baseline excluded.
fn methods(rows: &[SummaryRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows.iter().filter(|r| r.method != BASELINE_METHOD) {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

fn axis_values(rows: &[SummaryRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows.iter().filter(|r| r.method != BASELINE_METHOD) {
        if !out.contains(&r.axis_value) {
            out.push(r.axis_value.clone());
        }
    }
    out
}

fn cell<'a>(rows: &'a [SummaryRow], axis_value: &str, method: &str) -> Option<&'a SummaryRow> {
    rows.iter().find(|r| r.axis_value == axis_value && r.method == method)
}

fn baseline(rows: &[SummaryRow]) -> Result<&SummaryRow, ReportError> {
    rows.iter().find(|r| r.method == BASELINE_METHOD).ok_or(ReportError::MissingBaseline)
}

/// Methods as rows, axis values as columns, and a baseline row.
pub fn failure_table(rows: &[SummaryRow]) -> Result<String, ReportError> {
    let base = baseline(rows)?;
    let values = axis_values(rows);
    let header: Vec<String> = std::iter::once("method".to_string()).chain(values.iter().cloned()).collect();
    let mut body: Vec<Vec<String>> = methods(rows)
        .iter()
        .map(|m| {
            std::iter::once(m.clone())
                .chain(values.iter().map(|v| cell(rows, v, m).map_or_else(String::new, |r| fmt(r.failure_rate))))
                .collect()
        })
        .collect();
    body.push(std::iter::once(BASELINE_METHOD.to_string()).chain(values.iter().map(|_| fmt(base.failure_rate))).collect());
    Ok(raw_csv(&header, &body)?)
}

/// T1/T2/T3 triplets per axis value, one row per method.
pub fn recall_table(rows: &[SummaryRow]) -> Result<String, FormatError> {
    let values = axis_values(rows);
    let mut header = vec!["method".to_string()];
    for v in &values {
        header.extend(["T1", "T2", "T3"].iter().map(|t| format!("{v} {t}")));
    }
    let body: Vec<Vec<String>> = methods(rows)
        .iter()
        .map(|m| {
            let mut r = vec![m.clone()];
            for v in &values {
                let c = cell(rows, v, m);
                r.extend([c.and_then(|c| c.recall_t1), c.and_then(|c| c.recall_t2), c.and_then(|c| c.recall_t3)].map(opt));
            }
            r
        })
        .collect();
    raw_csv(&header, &body)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub axis_value: String,
    pub method: String,
    pub failure_rate: f64,
}

/// Failure rate along the axis for every method; the baseline is repeated
/// at each axis value so it plots as a flat line.
pub fn failure_series(rows: &[SummaryRow]) -> Result<Vec<SeriesRow>, ReportError> {
    let base = baseline(rows)?;
    let values = axis_values(rows);
    let mut out = Vec::new();
    for m in methods(rows) {
        for v in &values {
            if let Some(c) = cell(rows, v, &m) {
                out.push(SeriesRow { axis_value: v.clone(), method: m.clone(), failure_rate: c.failure_rate });
            }
        }
    }
    for v in &values {
        out.push(SeriesRow { axis_value: v.clone(), method: BASELINE_METHOD.into(), failure_rate: base.failure_rate });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub axis_value: String,
    pub method: String,
    #[serde(rename = "recall_T1")]
    pub recall_t1: f64,
    pub failure_rate: f64,
}

/// One point per (axis value, method).
pub fn recall_failure_scatter(rows: &[SummaryRow]) -> Vec<ScatterRow> {
    rows.iter()
        .filter(|r| r.method != BASELINE_METHOD)
        .map(|r| ScatterRow {
            axis_value: r.axis_value.clone(),
            method: r.method.clone(),
            recall_t1: r.recall_t1.unwrap_or(0.0),
            failure_rate: r.failure_rate,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrashRow {
    pub axis_value: String,
    pub method: String,
    pub episode: u32,
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub cause: &'static str,
}

pub fn crash_locations(result: &SweepResult) -> Vec<CrashRow> {
    let mut out = Vec::new();
    for p in result.points.iter().chain(result.baseline.iter()) {
        for e in &p.episodes {
            for f in &e.failure_events {
                out.push(CrashRow {
                    axis_value: p.axis_value.clone(),
                    method: p.method.clone(),
                    episode: e.episode_index,
                    timestamp: f.timestamp,
                    x: f.position.x,
                    y: f.position.y,
                    s: f.s,
                    cause: match f.cause {
                        FailureCause::Lateral => "lateral",
                        FailureCause::Stall => "stall",
                    },
                });
            }
        }
    }
    out
}

/// Writes the summary, tables, series, scatter, crash map data and SVG
/// charts into `dir`; returns the files written.
pub fn write_report(dir: &Path, result: &SweepResult, thresholds: &RecallThresholds) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::Io(dir.display().to_string(), e))?;
    let rows = summarize(result, thresholds)?;
    let series = failure_series(&rows)?;
    let scatter = recall_failure_scatter(&rows);
    let crashes = crash_locations(result);
    let route: Vec<[f64; 2]> = result.route.clone();
    let files: Vec<(&str, String)> = vec![
        ("summary.csv", summary_csv(&rows)?),
        ("failure_table.csv", failure_table(&rows)?),
        ("recall_table.csv", recall_table(&rows)?),
        ("failure_series.csv", csv_string(&series)?),
        ("recall_failure_scatter.csv", csv_string(&scatter)?),
        ("crashes.csv", csv_string(&crashes)?),
        ("route.csv", raw_csv(&["x".into(), "y".into()], &route.iter().map(|p| vec![p[0].to_string(), p[1].to_string()]).collect::<Vec<_>>())?),
        ("failure_rate.svg", svg::failure_chart(&result.axis, &series)),
        ("recall_vs_failure.svg", svg::scatter_chart(&scatter)),
        ("crashes.svg", svg::crash_map(&route, &crashes)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| FormatError::Io(path.display().to_string(), e))?;
        written.push(path);
    }
    Ok(written)
}
