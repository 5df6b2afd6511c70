//! Time-to-threshold tables over groups of runs.
//!
//! Cells are `mean (std)` of the solver time at which the ergodic minimum of
//! `||ĜF||²` first reaches each threshold, over the runs of a group. A cell
//! is `/` unless every run in the group reached the threshold.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use adarhd::RunTrace;
use anyhow::{Context, Result};

use crate::runner::{RunSummary, SUMMARY_FILE};

pub const THRESHOLDS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub reached: usize,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

impl Cell {
    fn from_times(times: &[Option<f64>]) -> Self {
        let hit: Vec<f64> = times.iter().flatten().copied().collect();
        let (mean, std) = if hit.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let m = hit.iter().sum::<f64>() / hit.len() as f64;
            let v = hit.iter().map(|t| (t - m).powi(2)).sum::<f64>() / hit.len() as f64;
            (m, v.sqrt())
        };
        Self {
            reached: hit.len(),
            runs: times.len(),
            mean,
            std,
        }
    }

    pub fn complete(&self) -> bool {
        self.runs > 0 && self.reached == self.runs
    }

    pub fn render(&self) -> String {
        if self.complete() {
            format!("{:.4} ({:.4})", self.mean, self.std)
        } else {
            "/".into()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub group: String,
    pub runs: usize,
    pub diverged: usize,
    pub cells: Vec<Cell>,
}

/// Group `(group key, trace)` pairs and compute one row per group, sorted
/// by key.
pub fn aggregate(traces: &[(String, RunTrace)]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<&str, Vec<&RunTrace>> = BTreeMap::new();
    for (g, t) in traces {
        groups.entry(g.as_str()).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(g, ts)| AggregateRow {
            group: g.to_string(),
            runs: ts.len(),
            diverged: ts.iter().filter(|t| t.status == adarhd::RunStatus::Diverged).count(),
            cells: THRESHOLDS
                .iter()
                .map(|&thr| Cell::from_times(&ts.iter().map(|t| t.time_to(thr)).collect::<Vec<_>>()))
                .collect(),
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["group".to_string(), "runs".into(), "diverged".into()];
    for t in THRESHOLDS {
        header.push(format!("time_to_{t:e}"));
        header.push(format!("reached_{t:e}"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.group.clone(), r.runs.to_string(), r.diverged.to_string()];
        for c in &r.cells {
            rec.push(c.render());
            rec.push(format!("{}/{}", c.reached, c.runs));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_table(rows: &[AggregateRow]) -> String {
    let width = rows.iter().map(|r| r.group.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  runs  div", "group");
    for t in THRESHOLDS {
        let _ = write!(out, "  {:>20}", format!("t(<= {t:e})"));
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<width$}  {:>4}  {:>3}", r.group, r.runs, r.diverged);
        for c in &r.cells {
            let _ = write!(out, "  {:>20}", c.render());
        }
        out.push('\n');
    }
    out
}

/// Load the traces of a run directory written by the runner.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, RunTrace)>> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let sums: Vec<RunSummary> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    sums.into_iter()
        .map(|s| {
            let f = dir.join(&s.trace_file);
            let file = fs::File::open(&f).with_context(|| format!("opening {}", f.display()))?;
            let mut trace = RunTrace::new(s.algorithm.clone(), s.problem.kind());
            trace.records = RunTrace::read_csv(file)?;
            trace.status = s.status;
            Ok((s.group, trace))
        })
        .collect()
}

pub fn summarize_dir(dir: &Path) -> Result<Vec<AggregateRow>> {
    let traces = load_dir(dir)?;
    anyhow::ensure!(!traces.is_empty(), "no traces in {}", dir.display());
    Ok(aggregate(&traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use adarhd::{IterRecord, RowStatus, RunStatus};

    fn trace(sq: &[f64], status: RunStatus) -> RunTrace {
        let mut t = RunTrace::new("a", "p");
        t.status = status;
        t.records = sq
            .iter()
            .enumerate()
            .map(|(i, &v)| IterRecord {
                t: i,
                hypergrad_sq: v,
                a: 1.0,
                k_t: 0,
                n_t: 0,
                upper_obj: 0.0,
                time_s: i as f64,
                hypergrad_error: None,
                status: RowStatus::Ok,
            })
            .collect();
        t
    }

    #[test]
    fn converged_trace_fills_all_thresholds_monotonically() {
        let rows = aggregate(&[("g".into(), trace(&[1.0, 5e-3, 1e-2, 5e-4, 1e-5], RunStatus::Ok))]);
        let c = &rows[0].cells;
        assert!(c.iter().all(Cell::complete));
        assert_eq!([c[0].mean, c[1].mean, c[2].mean], [1.0, 3.0, 4.0]);
    }

    #[test]
    fn diverged_trace_is_all_slashes() {
        let rows = aggregate(&[("g".into(), trace(&[1e-5], RunStatus::Diverged))]);
        assert!(rows[0].cells.iter().all(|c| c.render() == "/"));
        assert_eq!(rows[0].diverged, 1);
    }

    #[test]
    fn mean_and_population_std() {
        let rows = aggregate(&[
            ("g".into(), trace(&[1.0, 1e-5], RunStatus::Ok)),
            ("g".into(), trace(&[1.0, 1.0, 1.0, 1e-5], RunStatus::Ok)),
            ("h".into(), trace(&[1.0], RunStatus::Ok)),
        ]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].cells[0].mean, rows[0].cells[0].std), (2.0, 1.0));
        assert_eq!(rows[0].cells[0].render(), "2.0000 (1.0000)");
        assert_eq!(rows[1].cells[0].render(), "/");
        assert!(render_table(&rows).contains("2.0000 (1.0000)"));
    }
}
