//! Per-outer-iteration run records and their CSV / JSON forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ArrayRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    #[default]
    Ok,
    /// An inner loop stopped at its iteration cap.
    Cap,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    #[default]
    Ok,
    EarlyStop,
    Diverged,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::EarlyStop => "early_stop",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// One outer iteration. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    /// `||ĜF(x_t, y_t, v_t)||²`.
    pub hypergrad_sq: f64,
    /// Outer step-size accumulator `a_{t+1}` after this iteration's update.
    pub a: f64,
    #[serde(rename = "K_t")]
    pub k_t: usize,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    /// `f(x_t, y_t^{K_t})`.
    pub upper_obj: f64,
    /// Solver wall time since the start of the run (diagnostics excluded).
    pub time_s: f64,
    pub hypergrad_error: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub problem: String,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    pub cap_hits: usize,
    pub final_x: Option<ArrayRecord>,
    pub final_y: Option<ArrayRecord>,
    pub final_v: Option<ArrayRecord>,
}

impl RunTrace {
    pub fn new(algorithm: impl Into<String>, problem: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            problem: problem.into(),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn hypergrad_sq(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.hypergrad_sq).collect()
    }

    /// Running minimum of `||ĜF||²`.
    pub fn ergodic(&self) -> Vec<f64> {
        ergodic_min_gradnorm(self)
    }

    /// First solver time at which the ergodic minimum drops to `threshold`.
    pub fn time_to(&self, threshold: f64) -> Option<f64> {
        if self.status == RunStatus::Diverged {
            return None;
        }
        let mut best = f64::INFINITY;
        for r in &self.records {
            best = best.min(r.hypergrad_sq);
            if best <= threshold {
                return Some(r.time_s);
            }
        }
        None
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        if self.records.is_empty() {
            w.write_record(CSV_HEADER).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Parse the per-iteration rows written by [`RunTrace::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<IterRecord>> {
        let mut rd = csv::Reader::from_reader(input);
        rd.deserialize()
            .collect::<std::result::Result<Vec<IterRecord>, _>>()
            .map_err(csv_err)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "hypergrad_sq",
    "a",
    "K_t",
    "N_t",
    "upper_obj",
    "time_s",
    "hypergrad_error",
    "status",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Running minimum `min_{i<=t} ||ĜF_i||²` over the trace.
pub fn ergodic_min_gradnorm(trace: &RunTrace) -> Vec<f64> {
    running_min(&trace.hypergrad_sq())
}

pub fn running_min(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(f64::INFINITY, |best, &v| {
            *best = best.min(v);
            Some(*best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_with(norms: &[f64]) -> RunTrace {
        let mut t = RunTrace::new("test", "none");
        for (i, &n) in norms.iter().enumerate() {
            t.records.push(IterRecord {
                t: i,
                hypergrad_sq: n,
                a: 1.0,
                k_t: 0,
                n_t: 0,
                upper_obj: 0.0,
                time_s: i as f64,
                hypergrad_error: None,
                status: RowStatus::Ok,
            });
        }
        t
    }

    #[test]
    fn ergodic_examples() {
        assert_eq!(ergodic_min_gradnorm(&trace_with(&[5.0, 5.0, 5.0])), vec![5.0, 5.0, 5.0]);
        assert_eq!(ergodic_min_gradnorm(&trace_with(&[4.0, 1.0, 3.0])), vec![4.0, 1.0, 1.0]);
        assert!(ergodic_min_gradnorm(&trace_with(&[])).is_empty());
    }

    #[test]
    fn csv_has_documented_columns() {
        let mut t = trace_with(&[0.5, 0.25]);
        t.records[1].hypergrad_error = Some(1e-3);
        t.records[1].status = RowStatus::Cap;
        let s = t.to_csv_string().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "0,0.5,1.0,0,0,0.0,0.0,,ok");
        assert_eq!(lines.next().unwrap(), "1,0.25,1.0,0,0,0.0,1.0,0.001,cap");
        let back = RunTrace::read_csv(s.as_bytes()).unwrap();
        assert_eq!(back, t.records);
    }

    #[test]
    fn empty_trace_still_has_header() {
        let s = trace_with(&[]).to_csv_string().unwrap();
        assert_eq!(s.trim(), CSV_HEADER.join(","));
    }

    #[test]
    fn time_to_threshold() {
        let t = trace_with(&[1.0, 0.5, 1e-3, 2.0]);
        assert_eq!(t.time_to(1e-2), Some(2.0));
        assert_eq!(t.time_to(1e-4), None);
    }
}
