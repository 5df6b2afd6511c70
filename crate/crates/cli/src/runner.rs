//! Executing experiments and writing their outputs.
//!
//! A run directory holds one `<key>.csv` trace per run, `summary.json` with
//! per-run metadata, `long.csv` (all runs stacked, plot-ready) and, for
//! sweeps, `aggregate.csv` from [`crate::summarize`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use adarhd::{run_adarhd, run_minmax, run_rhgd, trace_or_diverged, ProblemSpec, RunStatus, RunTrace};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::{ExperimentSpec, RunConfig, Solver};
use crate::summarize::{aggregate, write_aggregate_csv};

pub const OUTPUT_ROOT_ENV: &str = "ADARHD_OUTPUT_ROOT";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub key: String,
    pub group: String,
    pub algorithm: String,
    pub problem: ProblemSpec,
    pub step_seed: f64,
    pub seed: Option<u64>,
    pub status: RunStatus,
    pub iterations: usize,
    pub cap_hits: usize,
    /// `min_t ||ĜF_t||²` over the run.
    pub final_ergodic: Option<f64>,
    pub final_hypergrad_error: Option<f64>,
    /// Solver time at the last recorded iteration.
    pub solver_time_s: f64,
    /// Wall time of the whole run, including diagnostics.
    pub wall_time_s: f64,
    pub trace_file: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trace: RunTrace,
    pub wall_time_s: f64,
}

impl RunOutcome {
    pub fn summary(&self) -> RunSummary {
        let key = self.config.key();
        RunSummary {
            group: self.config.group(),
            algorithm: self.trace.algorithm.clone(),
            problem: self.config.problem.clone(),
            step_seed: self.config.solver.step_seed(),
            seed: self.config.seed,
            status: self.trace.status,
            iterations: self.trace.len(),
            cap_hits: self.trace.cap_hits,
            final_ergodic: self.trace.ergodic().last().copied(),
            final_hypergrad_error: self.trace.records.last().and_then(|r| r.hypergrad_error),
            solver_time_s: self.trace.records.last().map_or(0.0, |r| r.time_s),
            wall_time_s: self.wall_time_s,
            trace_file: format!("{key}.csv"),
            key,
        }
    }
}

/// Run one configuration. Divergence is a normal outcome (status
/// `diverged`); any other failure is an error.
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let problem = config
        .problem
        .build()
        .with_context(|| format!("building problem {}", config.problem.kind()))?;
    let start = Instant::now();
    let result = match &config.solver {
        Solver::AdaRhd(c) => run_adarhd(problem.as_ref(), c),
        Solver::Rhgd(c) => run_rhgd(problem.as_ref(), c),
        Solver::MinMax(c) => run_minmax(problem.as_ref(), c),
    };
    let trace = trace_or_diverged(result).with_context(|| format!("run {}", config.key()))?;
    Ok(RunOutcome {
        config: config.clone(),
        trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Output root: explicit argument, then `$ADARHD_OUTPUT_ROOT`, then `./runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn output_dir(spec: &ExperimentSpec, spec_path: Option<&Path>, root: &Path) -> PathBuf {
    match &spec.output {
        Some(o) if Path::new(o).is_absolute() => PathBuf::from(o),
        Some(o) => root.join(o),
        None => root.join(spec.display_name(spec_path)),
    }
}

/// Execute runs on a pool of `jobs` workers (0 = one per core). Results come
/// back sorted by run key.
pub fn execute_all(runs: &[RunConfig], jobs: usize) -> Result<Vec<RunOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let mut out = pool.install(|| runs.par_iter().map(execute).collect::<Result<Vec<_>>>())?;
    out.sort_by(|a, b| a.config.key().cmp(&b.config.key()));
    Ok(out)
}

/// Write traces, `summary.json` and `long.csv` into `dir`; with `aggregate`
/// also `aggregate.csv`.
pub fn write_outputs(dir: &Path, outcomes: &[RunOutcome], with_aggregate: bool) -> Result<Vec<RunSummary>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut summaries = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let s = o.summary();
        let f = fs::File::create(dir.join(&s.trace_file))?;
        o.trace.write_csv(std::io::BufWriter::new(f))?;
        summaries.push(s);
    }
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summaries)?)?;
    write_long_csv(&dir.join("long.csv"), outcomes)?;
    if with_aggregate {
        let rows = aggregate(
            &outcomes
                .iter()
                .map(|o| (o.config.group(), o.trace.clone()))
                .collect::<Vec<_>>(),
        );
        write_aggregate_csv(&dir.join("aggregate.csv"), &rows)?;
    }
    Ok(summaries)
}

fn write_long_csv(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "key",
        "algorithm",
        "step_seed",
        "seed",
        "t",
        "hypergrad_sq",
        "ergodic_min",
        "time_s",
        "hypergrad_error",
        "status",
    ])?;
    for o in outcomes {
        let key = o.config.key();
        let seed = o.config.seed.map(|s| s.to_string()).unwrap_or_default();
        let step = o.config.solver.step_seed().to_string();
        for (r, e) in o.trace.records.iter().zip(o.trace.ergodic()) {
            w.write_record([
                key.as_str(),
                o.trace.algorithm.as_str(),
                step.as_str(),
                seed.as_str(),
                &r.t.to_string(),
                &r.hypergrad_sq.to_string(),
                &e.to_string(),
                &r.time_s.to_string(),
                &r.hypergrad_error.map(|v| v.to_string()).unwrap_or_default(),
                o.trace.status.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `run`: the base configuration only.
pub fn run_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<Vec<RunSummary>> {
    let outcome = execute(&spec.base_run()?)?;
    write_outputs(dir, &[outcome], false)
}

/// `sweep`: the full cross product of the sweep block.
pub fn run_sweep(spec: &ExperimentSpec, dir: &Path, jobs: usize) -> Result<Vec<RunSummary>> {
    let outcomes = execute_all(&spec.runs()?, jobs)?;
    write_outputs(dir, &outcomes, true)
}
