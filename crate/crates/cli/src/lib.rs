//! Experiment runner: TOML experiment specs, sweeps on a worker pool,
//! trace output and time-to-threshold summaries.

pub mod check;
pub mod runner;
pub mod spec;
pub mod summarize;

pub use runner::{execute, output_dir, output_root, run_experiment, run_sweep, RunSummary, OUTPUT_ROOT_ENV};
pub use spec::{ExperimentSpec, RunConfig, Solver};
