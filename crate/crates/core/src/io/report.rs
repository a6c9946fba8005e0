//! CSV/JSON report writers. Floats are printed with 17 significant digits so
//! every value round-trips exactly; all field orderings are fixed, making
//! reruns byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::estimators::{sorted_indices, InfluenceReport};
use crate::harness::detection::{DetectionReport, SelectionReport};
use crate::harness::invert_bench::BenchRow;
use crate::harness::synthetic::CellResult;

/// 17 significant digits: lossless f64 round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `scores.csv` with header `example_id,score,rank`; rank 1 is the most
/// helpful (lowest score), ties resolved by example index.
pub fn write_scores_csv(report: &InfluenceReport, dir: &Path) -> Result<PathBuf> {
    let n = report.scores.len();
    let order = sorted_indices(&report.scores, false);
    let mut rank = vec![0usize; n];
    for (pos, idx) in order.iter().enumerate() {
        rank[*idx] = pos + 1;
    }
    let mut out = String::from("example_id,score,rank\n");
    for i in 0..n {
        out.push_str(&format!(
            "{},{},{}\n",
            report.example_ids[i],
            fmt_f64(report.scores[i]),
            rank[i]
        ));
    }
    let path = dir.join("scores.csv");
    write_atomic(&path, &out)?;
    Ok(path)
}

/// Parses a `scores.csv` back into (id, score, rank) rows.
pub fn parse_scores_csv(contents: &str) -> Result<Vec<(String, f64, usize)>> {
    let mut rows = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or_default().to_string();
        let score: f64 =
            parts.next().unwrap_or_default().parse().map_err(|e| {
                crate::error::Error::Manifest(format!("bad score on line {i}: {e}"))
            })?;
        let rank: usize = parts
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| crate::error::Error::Manifest(format!("bad rank on line {i}: {e}")))?;
        rows.push((id, score, rank));
    }
    Ok(rows)
}

/// `run.json`: configuration echo with stable key order.
pub fn write_run_json(config: &serde_json::Value, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("run.json");
    write_atomic(&path, &serde_json::to_string_pretty(config)?)?;
    Ok(path)
}

/// `traces.csv` for the convergence sweep:
/// `dim,samples,method,metric,iteration,error,converged,diverged`.
pub fn write_traces_csv(cells: &[CellResult], dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("dim,samples,method,metric,iteration,error,converged,diverged\n");
    for cell in cells {
        for trace in &cell.traces {
            for (it, err) in trace.per_iteration_error.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    cell.dim,
                    cell.samples,
                    trace.method,
                    trace.error_metric.label(),
                    it + 1,
                    fmt_f64(*err),
                    trace.converged,
                    trace.diverged
                ));
            }
        }
    }
    let path = dir.join("traces.csv");
    write_atomic(&path, &out)?;
    Ok(path)
}

/// `bench.csv`: `dim,method,mean_error,std_error,mean_time_s,std_time_s`.
pub fn write_bench_csv(rows: &[BenchRow], dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("dim,method,mean_error,std_error,mean_time_s,std_time_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.dim,
            r.method,
            fmt_f64(r.mean_error()),
            fmt_f64(r.std_error()),
            fmt_f64(r.mean_time()),
            fmt_f64(r.std_time())
        ));
    }
    let path = dir.join("bench.csv");
    write_atomic(&path, &out)?;
    Ok(path)
}

/// `recall.csv`: `estimator,p,rt_mean,rt_ci95` plus oracle and random rows.
pub fn write_recall_csv(report: &DetectionReport, dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("estimator,p,rt_mean,rt_ci95\n");
    for curve in &report.curves {
        for (i, p) in report.p_grid.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                curve.estimator,
                p,
                fmt_f64(curve.mean[i]),
                fmt_f64(curve.ci95[i])
            ));
        }
    }
    for (label, series) in [("oracle", &report.oracle), ("random", &report.random_guess)] {
        for (i, p) in report.p_grid.iter().enumerate() {
            out.push_str(&format!(
                "{label},{p},{},{}\n",
                fmt_f64(series[i]),
                fmt_f64(0.0)
            ));
        }
    }
    let path = dir.join("recall.csv");
    write_atomic(&path, &out)?;
    Ok(path)
}

/// `selection.csv`: `selector,k_percent,mean_accuracy,ci95,skipped`.
pub fn write_selection_csv(report: &SelectionReport, dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("selector,k_percent,mean_accuracy,ci95,skipped\n");
    for c in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.selector,
            c.k_percent,
            if c.mean_accuracy.is_nan() {
                String::new()
            } else {
                fmt_f64(c.mean_accuracy)
            },
            fmt_f64(c.ci95),
            c.skipped.clone().unwrap_or_default()
        ));
    }
    let path = dir.join("selection.csv");
    write_atomic(&path, &out)?;
    Ok(path)
}
