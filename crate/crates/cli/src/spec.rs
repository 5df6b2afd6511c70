//! Experiment files (TOML).
//!
//! ```toml
//! name = "toy"
//!
//! [problem]
//! kind = "toy_quadratic"
//! nx = 5
//! ny = 8
//! seed = 0
//!
//! [solver]
//! algorithm = "adarhd"      # adarhd | adarhd_r | rhgd | minmax | minmax_r
//! T = 100
//! inner_mode = "gd"
//!
//! [sweep]                   # optional
//! step_seeds = [0.2, 1, 2, 10, 20]
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Solver keys are those of [`AdaRHDConfig`] or [`RHGDConfig`]; the map
//! mode is implied by the algorithm name.

use std::path::Path;

use adarhd::{AdaRHDConfig, MapMode, ProblemSpec, RHGDConfig};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MAX_SWEEP_RUNS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Adarhd,
    AdarhdR,
    Rhgd,
    Minmax,
    MinmaxR,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Output directory; relative paths are resolved against the output root.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// `a0 = b0 = c0` for the adaptive solvers, `eta_x = eta_y` for RHGD.
    #[serde(default)]
    pub step_seeds: Vec<f64>,
    /// Data / initialization seeds of the problem instance.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

/// A solver with its configuration resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Solver {
    AdaRhd(AdaRHDConfig),
    Rhgd(RHGDConfig),
    MinMax(AdaRHDConfig),
}

impl Solver {
    pub fn name(&self) -> String {
        match self {
            Solver::AdaRhd(c) => c.algorithm_name(),
            Solver::Rhgd(c) => format!("rhgd-{}", c.inner_iters),
            Solver::MinMax(c) => match c.map_mode {
                MapMode::Exp => "minmax".into(),
                MapMode::Retract => "minmax_r".into(),
            },
        }
    }

    /// Apply a swept step-size seed.
    pub fn with_step_seed(&self, s: f64) -> Self {
        match self {
            Solver::AdaRhd(c) => Solver::AdaRhd(c.clone().seeds(s)),
            Solver::MinMax(c) => Solver::MinMax(c.clone().seeds(s)),
            Solver::Rhgd(c) => Solver::Rhgd(RHGDConfig {
                eta_x: s,
                eta_y: s,
                ..c.clone()
            }),
        }
    }

    /// The step-size seed this configuration runs with.
    pub fn step_seed(&self) -> f64 {
        match self {
            Solver::AdaRhd(c) | Solver::MinMax(c) => c.a0,
            Solver::Rhgd(c) => c.eta_x,
        }
    }

    pub fn validate(&self) -> adarhd::Result<()> {
        match self {
            Solver::AdaRhd(c) | Solver::MinMax(c) => c.validate(),
            Solver::Rhgd(c) => c.validate(),
        }
    }
}

impl SolverSpec {
    pub fn resolve(&self) -> Result<Solver> {
        let implied = match self.algorithm {
            Algorithm::Adarhd | Algorithm::Minmax => Some(MapMode::Exp),
            Algorithm::AdarhdR | Algorithm::MinmaxR => Some(MapMode::Retract),
            Algorithm::Rhgd => None,
        };
        let mut params = self.params.clone();
        if let Some(mode) = implied {
            if params.contains_key("map_mode") {
                bail!("solver.map_mode is implied by algorithm = {:?}; remove it", self.algorithm);
            }
            let v = match mode {
                MapMode::Exp => "exp",
                MapMode::Retract => "retract",
            };
            params.insert("map_mode".into(), toml::Value::String(v.into()));
        }
        let solver = match self.algorithm {
            Algorithm::Adarhd | Algorithm::AdarhdR => Solver::AdaRhd(
                params.try_into().context("invalid [solver] block for adarhd")?,
            ),
            Algorithm::Minmax | Algorithm::MinmaxR => Solver::MinMax(
                params.try_into().context("invalid [solver] block for minmax")?,
            ),
            Algorithm::Rhgd => Solver::Rhgd(params.try_into().context("invalid [solver] block for rhgd")?),
        };
        solver.validate()?;
        Ok(solver)
    }
}

/// One run of an experiment: problem instance plus solver.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: Solver,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// File-name safe identifier, unique within a sweep.
    pub fn key(&self) -> String {
        let mut k = format!("{}_s{}", self.solver.name(), fmt_seed(self.solver.step_seed()));
        if let Some(s) = self.seed {
            k.push_str(&format!("_seed{s}"));
        }
        k
    }

    /// Key without the random seed; runs sharing it are aggregated.
    pub fn group(&self) -> String {
        format!("{}_s{}", self.solver.name(), fmt_seed(self.solver.step_seed()))
    }
}

fn fmt_seed(s: f64) -> String {
    format!("{s}").replace('-', "m")
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        spec.runs()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// The base configuration only, ignoring any sweep.
    pub fn base_run(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            problem: self.problem.clone(),
            solver: self.solver.resolve()?,
            seed: None,
        })
    }

    /// Cross product of the sweep lists (or the base run without a sweep).
    pub fn runs(&self) -> Result<Vec<RunConfig>> {
        let base = self.base_run()?;
        let Some(sweep) = &self.sweep else {
            return Ok(vec![base]);
        };
        let steps: Vec<Option<f64>> = if sweep.step_seeds.is_empty() {
            vec![None]
        } else {
            sweep.step_seeds.iter().map(|s| Some(*s)).collect()
        };
        let seeds: Vec<Option<u64>> = if sweep.seeds.is_empty() {
            vec![None]
        } else {
            sweep.seeds.iter().map(|s| Some(*s)).collect()
        };
        let total = steps.len() * seeds.len();
        if total > MAX_SWEEP_RUNS {
            bail!("sweep has {total} runs; the limit is {MAX_SWEEP_RUNS}");
        }
        let mut out = Vec::with_capacity(total);
        for s in &steps {
            let solver = match s {
                Some(s) => base.solver.with_step_seed(*s),
                None => base.solver.clone(),
            };
            solver.validate()?;
            for seed in &seeds {
                out.push(RunConfig {
                    problem: match seed {
                        Some(seed) => self.problem.with_seed(*seed),
                        None => self.problem.clone(),
                    },
                    solver: solver.clone(),
                    seed: *seed,
                });
            }
        }
        Ok(out)
    }

    pub fn display_name(&self, path: Option<&Path>) -> String {
        self.name
            .clone()
            .or_else(|| path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "experiment".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
name = "toy"
[problem]
kind = "toy_quadratic"
nx = 3
ny = 4
[solver]
algorithm = "adarhd_r"
T = 20
inner_mode = "cg"
[sweep]
step_seeds = [0.2, 1.0]
seeds = [0, 1, 2]
"#;

    #[test]
    fn parses_and_expands_sweep() {
        let spec = ExperimentSpec::from_toml(TOY).unwrap();
        let runs = spec.runs().unwrap();
        assert_eq!(runs.len(), 6);
        let Solver::AdaRhd(c) = &runs[0].solver else { panic!() };
        assert_eq!(c.map_mode, MapMode::Retract);
        assert_eq!((c.a0, c.b0, c.c0, c.t), (0.2, 0.2, 0.2, 20));
        assert_eq!(runs[5].key(), "adarhd_r-cg_s1_seed2");
        let again = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(again.runs().unwrap().len(), 6);
    }

    #[test]
    fn rejects_unknown_and_conflicting_fields() {
        let bad = TOY.replace("inner_mode = \"cg\"", "inner_mod = \"cg\"");
        let err = format!("{:#}", ExperimentSpec::from_toml(&bad).unwrap_err());
        assert!(err.contains("inner_mod"), "{err}");
        let bad = TOY.replace("inner_mode = \"cg\"", "map_mode = \"exp\"");
        assert!(ExperimentSpec::from_toml(&bad).is_err());
        let bad = TOY.replace("kind = \"toy_quadratic\"", "kind = \"nope\"");
        let err = format!("{:#}", ExperimentSpec::from_toml(&bad).unwrap_err());
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn rhgd_sweeps_eta() {
        let text = r#"
[problem]
kind = "saddle"
[solver]
algorithm = "rhgd"
T = 5
inner_iters = 20
[sweep]
step_seeds = [0.5, 0.1]
"#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        let runs = spec.runs().unwrap();
        let Solver::Rhgd(c) = &runs[1].solver else { panic!() };
        assert_eq!((c.eta_x, c.eta_y, c.inner_iters), (0.1, 0.1, 20));
        assert_eq!(runs[1].key(), "rhgd-20_s0.1");
    }

    #[test]
    fn oversized_sweep_is_rejected() {
        let mut spec = ExperimentSpec::from_toml(TOY).unwrap();
        spec.sweep = Some(SweepSpec {
            step_seeds: vec![1.0; 101],
            seeds: (0..100).collect(),
        });
        assert!(spec.runs().is_err());
    }
}
