//! Grid runner, CSV output and summaries.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::trial::{run_trial, TrialRecord, TrialStreams};
use super::{ExperimentConfig, HarnessError, Policy};
use crate::fixtures;
use crate::model::{parse_pomdp, Pomdp};
use crate::numeric::{fmt17, mean_and_se};
use crate::valuefn::{parse_alpha_with, AlphaSet, Objective, Solver};

/// One grid cell: a policy with a particle count and a batch limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub policy: Policy,
    pub particles: usize,
    /// Batch limit for `pf_dynamic`; `0` is unbounded.
    pub batches: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub trials: usize,
    pub mean_loss: f64,
    pub se_loss: f64,
    pub mean_samples_per_stage: f64,
    pub mean_samples_total: f64,
    pub mean_batches: f64,
    /// Depletion events per stage.
    pub depletion_rate: f64,
}

/// Loads a model from a file path or a bundled name.
pub fn load_model(name: &str) -> Result<Pomdp, HarnessError> {
    let path = Path::new(name);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{name}: {e}")))?;
        return Ok(parse_pomdp(&text)?);
    }
    fixtures::by_name(name).ok_or_else(|| {
        HarnessError::Io(format!("'{name}' is neither a model file nor a bundled model"))
    })
}

fn load_alpha(path: &Path, objective: Objective) -> Result<AlphaSet, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_alpha_with(&text, objective)?)
}

/// Solves `model` with the config's horizon, prune level and tolerance.
pub fn solve_for(
    model: &Pomdp,
    config: &ExperimentConfig,
    objective: Objective,
) -> Result<AlphaSet, HarnessError> {
    let solver = Solver {
        tolerance: config.tolerance,
        ..Solver::new(objective, config.prune)
    };
    Ok(match config.horizon {
        Some(h) => solver.solve(model, h)?,
        None => solver.solve_stationary(model)?,
    })
}

/// A validated config with its model and value functions.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Pomdp,
    pub set: AlphaSet,
    pub worst: Option<AlphaSet>,
}

impl Experiment {
    /// Loads the model and alpha files, solving inline where no file is
    /// given. The minimizing set is only built when `worst` is requested.
    pub fn load(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let model = load_model(&config.model)?;
        let set = match &config.alpha {
            Some(p) => load_alpha(p, Objective::Maximize)?,
            None => solve_for(&model, &config, Objective::Maximize)?,
        };
        let worst = if config.policies.contains(&Policy::Worst) {
            Some(match &config.worst_alpha {
                Some(p) => load_alpha(p, Objective::Minimize)?,
                None => solve_for(&model, &config, Objective::Minimize)?,
            })
        } else {
            None
        };
        Self::new(config, model, set, worst)
    }

    pub fn new(
        config: ExperimentConfig,
        model: Pomdp,
        set: AlphaSet,
        worst: Option<AlphaSet>,
    ) -> Result<Self, HarnessError> {
        config.validate()?;
        if set.objective() != Objective::Maximize {
            return Err(HarnessError::Invalid("monitoring set must be maximizing".into()));
        }
        set.check_model(&model)?;
        if let Some(w) = &worst {
            if w.objective() != Objective::Minimize {
                return Err(HarnessError::Invalid("worst set must be minimizing".into()));
            }
            w.check_model(&model)?;
        }
        if config.policies.contains(&Policy::Worst) && worst.is_none() {
            return Err(HarnessError::Invalid("worst policy needs a minimizing set".into()));
        }
        Ok(Self {
            config,
            model,
            set,
            worst,
        })
    }

    /// Grid cells in output order. Policies that ignore a dimension get one
    /// cell for it, reported with a zero.
    pub fn cells(&self) -> Vec<Cell> {
        let c = &self.config;
        let mut out = Vec::new();
        for &policy in &c.policies {
            let particles: &[usize] = match policy {
                Policy::PfSis | Policy::PfEi | Policy::Random => &c.particles,
                _ => &[0],
            };
            let batches: &[u64] = match policy {
                Policy::PfDynamic => &c.batches,
                _ => &[0],
            };
            for &particles in particles {
                for &batches in batches {
                    out.push(Cell {
                        policy,
                        particles,
                        batches,
                    });
                }
            }
        }
        out
    }

    pub fn run_trial(&self, cell: &Cell, trial: u64) -> Result<TrialRecord, HarnessError> {
        let mut streams = TrialStreams::new(self.config.seed, trial);
        run_trial(
            &self.model,
            &self.set,
            self.worst.as_ref(),
            &self.config,
            cell,
            trial,
            &mut streams,
        )
    }

    /// All trials of one cell, in parallel, in trial order.
    pub fn run_cell(&self, cell: &Cell) -> Result<CellResult, HarnessError> {
        let trials = (0..self.config.trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(cell, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CellResult { cell: *cell, trials })
    }

    pub fn run(&self) -> Result<Vec<CellResult>, HarnessError> {
        self.cells().iter().map(|c| self.run_cell(c)).collect()
    }
}

/// Runs every cell of a loaded experiment.
pub fn run_experiment(experiment: &Experiment) -> Result<Vec<CellResult>, HarnessError> {
    experiment.run()
}

pub const CSV_HEADER: &str =
    "trial,policy,particles,batches_limit,stage_count,loss,samples_total,batches_mean,depletions,seed";

pub fn write_csv(results: &[CellResult], seed: u64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        for t in &r.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                t.trial,
                r.cell.policy,
                r.cell.particles,
                r.cell.batches,
                t.stages.len(),
                fmt17(t.loss),
                t.samples_total(),
                fmt17(t.batches_mean()),
                t.depletions(),
                seed
            );
        }
    }
    out
}

pub fn summarize(result: &CellResult) -> CellSummary {
    let losses: Vec<f64> = result.trials.iter().map(|t| t.loss).collect();
    let (mean_loss, se_loss) = mean_and_se(&losses);
    let n = result.trials.len().max(1) as f64;
    let stages: usize = result.trials.iter().map(|t| t.stages.len()).sum();
    let samples: u64 = result.trials.iter().map(|t| t.samples_total()).sum();
    let batches: f64 = result.trials.iter().map(|t| t.batches_mean()).sum();
    let depletions: u64 = result.trials.iter().map(|t| t.depletions()).sum();
    CellSummary {
        cell: result.cell,
        trials: result.trials.len(),
        mean_loss,
        se_loss,
        mean_samples_per_stage: samples as f64 / stages.max(1) as f64,
        mean_samples_total: samples as f64 / n,
        mean_batches: batches / n,
        depletion_rate: depletions as f64 / stages.max(1) as f64,
    }
}

/// Mean and standard error of `f(a_i) - f(b_i)` over paired trials.
pub fn paired_difference(
    a: &CellResult,
    b: &CellResult,
    f: impl Fn(&TrialRecord) -> f64,
) -> (f64, f64) {
    assert_eq!(a.trials.len(), b.trials.len(), "cells must be paired");
    let diffs: Vec<f64> = a.trials.iter().zip(&b.trials).map(|(x, y)| f(x) - f(y)).collect();
    mean_and_se(&diffs)
}

/// Human-readable summary table.
pub fn summary_table(results: &[CellResult]) -> String {
    let mut out = format!(
        "{:<11} {:>9} {:>7} {:>7} {:>12} {:>10} {:>12} {:>9} {:>10}\n",
        "policy", "particles", "batches", "trials", "mean_loss", "se", "samples/stg", "batches", "depletion"
    );
    for r in results {
        let s = summarize(r);
        let _ = writeln!(
            out,
            "{:<11} {:>9} {:>7} {:>7} {:>12.5} {:>10.5} {:>12.2} {:>9.3} {:>10.4}",
            s.cell.policy.name(),
            s.cell.particles,
            s.cell.batches,
            s.trials,
            s.mean_loss,
            s.se_loss,
            s.mean_samples_per_stage,
            s.mean_batches,
            s.depletion_rate
        );
    }
    out
}
