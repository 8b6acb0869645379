//! Value-directed sampling: Hoeffding sample sizing, tau separation, the
//! batch-sequential vector selector and the decision-quality error bounds.

mod bounds;
mod select;

pub use bounds::{
    approx_multistage_bound, batch_size_formula, epsilon_bound, multistage_bound,
    one_stage_bound, posthoc_multistage_bound, posthoc_one_stage_bound, posthoc_tau,
    sample_size, simultaneous_sample_size, BoundInputs, Estimate,
};
pub use select::{
    dynamic_select, select_from_belief, Look, SelectionReport, SelectionStatus, VectorEstimate,
};

use thiserror::Error;

use crate::filter::FilterError;
use crate::valuefn::AlphaSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VdsError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error("the vector selector needs a maximizing alpha set")]
    Objective,
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// How the global `delta` is split over looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `delta_j = delta / B`; needs a finite batch limit.
    Uniform,
    /// `delta_j = delta / (j (j + 1))`; needs an unbounded batch limit.
    Harmonic,
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "harmonic" => Ok(Self::Harmonic),
            _ => Err(format!("unknown schedule '{s}' (uniform|harmonic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Fixed(u64),
    /// `ceil((max R^2 / (2 B eps^2)) ln(B |set| / delta))`; needs a finite `B`.
    FromFormula,
}

impl std::str::FromStr for BatchSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "formula" || s == "from-formula" {
            return Ok(Self::FromFormula);
        }
        s.parse::<u64>()
            .map(Self::Fixed)
            .map_err(|_| format!("batch size must be a count or 'formula', got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub epsilon: f64,
    pub delta: f64,
    /// `None` means unbounded.
    pub max_batches: Option<u64>,
    pub batch_size: BatchSize,
    pub schedule: Schedule,
    /// Stop as soon as `tau_j <= stop_threshold`.
    pub stop_threshold: f64,
    /// Hard stop for unbounded plans. The report is marked unseparated when
    /// it is reached.
    pub look_limit: u64,
}

impl SamplingPlan {
    pub const DEFAULT_LOOK_LIMIT: u64 = 1000;

    /// Uniform schedule over `batches` looks, formula batch sizes, stopping at
    /// `tau <= 2 epsilon`.
    pub fn bounded(epsilon: f64, delta: f64, batches: u64) -> Self {
        Self {
            epsilon,
            delta,
            max_batches: Some(batches),
            batch_size: BatchSize::FromFormula,
            schedule: Schedule::Uniform,
            stop_threshold: 2.0 * epsilon,
            look_limit: Self::DEFAULT_LOOK_LIMIT,
        }
    }

    /// Harmonic schedule with fixed batches, stopping at `tau <= 0`.
    pub fn unbounded(epsilon: f64, delta: f64, batch_size: u64) -> Self {
        Self {
            epsilon,
            delta,
            max_batches: None,
            batch_size: BatchSize::Fixed(batch_size),
            schedule: Schedule::Harmonic,
            stop_threshold: 0.0,
            look_limit: Self::DEFAULT_LOOK_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<(), VdsError> {
        let err = |m: &str| Err(VdsError::Plan(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return err("epsilon must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return err("delta must lie in (0, 1)");
        }
        if !(self.stop_threshold >= 0.0) {
            return err("stop threshold must be non-negative");
        }
        if self.look_limit == 0 {
            return err("look limit must be positive");
        }
        match (self.schedule, self.max_batches) {
            (Schedule::Harmonic, Some(_)) => return err("harmonic schedule needs unbounded batches"),
            (Schedule::Uniform, None) => return err("uniform schedule needs a finite batch limit"),
            (_, Some(0)) => return err("batch limit must be positive"),
            _ => {}
        }
        match (self.batch_size, self.max_batches) {
            (BatchSize::Fixed(0), _) => err("batch size must be positive"),
            (BatchSize::FromFormula, None) => err("formula batch size needs a finite batch limit"),
            _ => Ok(()),
        }
    }

    /// `delta_j` for look `j >= 1`.
    pub fn look_delta(&self, j: u64) -> f64 {
        match (self.schedule, self.max_batches) {
            (Schedule::Uniform, Some(b)) => self.delta / b as f64,
            _ => self.delta / (j as f64 * (j as f64 + 1.0)),
        }
    }

    /// Largest number of looks the plan can take.
    pub fn look_cap(&self) -> u64 {
        self.max_batches.unwrap_or(self.look_limit).min(self.look_limit)
    }

    /// Samples drawn per look; never less than one.
    pub fn batch_samples(&self, set: &AlphaSet) -> u64 {
        match (self.batch_size, self.max_batches) {
            (BatchSize::Fixed(m), _) => m,
            (BatchSize::FromFormula, Some(b)) => batch_size_formula(
                set.max_range(),
                self.epsilon,
                b,
                set.len(),
                self.delta,
            )
            .max(1),
            (BatchSize::FromFormula, None) => unreachable!("rejected by validate"),
        }
    }
}
