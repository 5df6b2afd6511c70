use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adarhd::diagnostics::report_table;
use adarhd_cli::summarize::{render_table, summarize_dir};
use adarhd_cli::{check, output_dir, output_root, run_experiment, run_sweep, ExperimentSpec, RunSummary};
use anyhow::Result;
use clap::{Parser, Subcommand};

/// Adaptive Riemannian bilevel optimization experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base configuration of a spec (ignores any [sweep] block).
    Run {
        spec: PathBuf,
        /// Output root (default: $ADARHD_OUTPUT_ROOT, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full sweep of a spec.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, short, default_value_t = 0)]
        jobs: usize,
    },
    /// Finite-difference and manifold property checks.
    Check {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the reports as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Time-to-threshold table for a run directory.
    Summarize { dir: PathBuf },
}

fn print_runs(dir: &Path, sums: &[RunSummary]) {
    for s in sums {
        println!(
            "{:<40} {:<11} iters={:<6} min|GF|^2={:<12} time={:.3}s",
            s.key,
            s.status.as_str(),
            s.iterations,
            s.final_ergodic.map_or("-".into(), |v| format!("{v:.3e}")),
            s.solver_time_s
        );
    }
    println!("wrote {}", dir.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { spec, out } => {
            let s = ExperimentSpec::load(&spec)?;
            let dir = output_dir(&s, Some(&spec), &output_root(out.as_deref()));
            let sums = run_experiment(&s, &dir)?;
            print_runs(&dir, &sums);
        }
        Command::Sweep { spec, out, jobs } => {
            let s = ExperimentSpec::load(&spec)?;
            let dir = output_dir(&s, Some(&spec), &output_root(out.as_deref()));
            let sums = run_sweep(&s, &dir, jobs)?;
            print_runs(&dir, &sums);
            println!("\n{}", render_table(&summarize_dir(&dir)?));
        }
        Command::Check {
            samples,
            points,
            seed,
            json,
        } => {
            let reports = check::run_all(samples, points, seed)?;
            print!("{}", report_table(&reports));
            if let Some(p) = json {
                std::fs::write(&p, serde_json::to_string_pretty(&reports)?)?;
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} checks, {failed} failed", reports.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Summarize { dir } => {
            print!("{}", render_table(&summarize_dir(&dir)?));
        }
    }
    Ok(ExitCode::SUCCESS)
}
