//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::filter::Resampling;
use crate::valuefn::Prune;
use crate::vds::{BatchSize, SamplingPlan, Schedule};

/// How the agent picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Exact Bayes filter.
    Exact,
    /// Fixed-size sequential importance sampling.
    PfSis,
    /// Fixed-size evidence-integration filter.
    PfEi,
    /// Evidence integration with batch-sequential vector selection.
    PfDynamic,
    /// Optimal action for a uniformly random belief.
    Random,
    /// Pessimal action for the exact belief.
    Worst,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Exact,
        Policy::PfSis,
        Policy::PfEi,
        Policy::PfDynamic,
        Policy::Random,
        Policy::Worst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Exact => "exact",
            Policy::PfSis => "pf_sis",
            Policy::PfEi => "pf_ei",
            Policy::PfDynamic => "pf_dynamic",
            Policy::Random => "random",
            Policy::Worst => "worst",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown policy '{s}' (exact|pf_sis|pf_ei|pf_dynamic|random|worst)")
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Path to a `.pomdp` file or the name of a bundled model.
    pub model: String,
    pub alpha: Option<PathBuf>,
    pub worst_alpha: Option<PathBuf>,
    /// Finite solve horizon; `None` solves to the stationary tolerance.
    pub horizon: Option<usize>,
    pub prune: Prune,
    pub tolerance: f64,
    pub policies: Vec<Policy>,
    pub particles: Vec<usize>,
    /// Batch limits for `pf_dynamic`; `0` means unbounded with the harmonic
    /// schedule.
    pub batches: Vec<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub batch_size: BatchSize,
    pub stop_threshold: f64,
    pub look_limit: u64,
    pub resampling: Resampling,
    pub trials: usize,
    pub stages: usize,
    pub seed: u64,
    /// Approximate stage 0 only and monitor exactly afterwards.
    pub single_stage: bool,
    /// Draw the `random` policy's belief once per trial.
    pub random_fixed: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: "tiger".into(),
            alpha: None,
            worst_alpha: None,
            horizon: None,
            prune: Prune::Lp,
            tolerance: 1e-4,
            policies: vec![Policy::Exact],
            particles: vec![100],
            batches: vec![10],
            epsilon: 0.5,
            delta: 0.1,
            batch_size: BatchSize::FromFormula,
            stop_threshold: 0.0,
            look_limit: SamplingPlan::DEFAULT_LOOK_LIMIT,
            resampling: Resampling::Multinomial,
            trials: 2000,
            stages: 15,
            seed: 0,
            single_stage: false,
            random_fixed: false,
            output: None,
        }
    }
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("'{value}': {e}"))
}

fn flag(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{value}'")),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 24] = [
        "model",
        "alpha",
        "worst_alpha",
        "horizon",
        "prune",
        "tolerance",
        "policy",
        "particles",
        "batches",
        "epsilon",
        "delta",
        "batch_size",
        "stop_threshold",
        "look_limit",
        "resampling",
        "trials",
        "stages",
        "seed",
        "single_stage",
        "random_fixed",
        "output",
        "schedule",
        "policies",
        "worst",
    ];

    /// Sets one key. Lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "model" => self.model = value.to_string(),
            "alpha" => self.alpha = optional_path(value),
            "worst_alpha" | "worst" => self.worst_alpha = optional_path(value),
            "horizon" => {
                self.horizon = match value {
                    "" | "stationary" => None,
                    v => Some(scalar(v)?),
                }
            }
            "prune" => self.prune = scalar(value)?,
            "tolerance" => self.tolerance = scalar(value)?,
            "policy" | "policies" => self.policies = list(value)?,
            "particles" => self.particles = list(value)?,
            "batches" => self.batches = list(value)?,
            "epsilon" => self.epsilon = scalar(value)?,
            "delta" => self.delta = scalar(value)?,
            "batch_size" => self.batch_size = scalar(value)?,
            "stop_threshold" => self.stop_threshold = scalar(value)?,
            "look_limit" => self.look_limit = scalar(value)?,
            "resampling" => self.resampling = scalar(value)?,
            "trials" => self.trials = scalar(value)?,
            "stages" => self.stages = scalar(value)?,
            "seed" => self.seed = scalar(value)?,
            "single_stage" => self.single_stage = flag(value)?,
            "random_fixed" => self.random_fixed = flag(value)?,
            "output" => self.output = optional_path(value),
            "schedule" => {
                // The schedule follows from each batch limit; accept the key
                // only when it agrees with the configured limits.
                let schedule: Schedule = scalar(value)?;
                let expected = |b: &u64| match b {
                    0 => Schedule::Harmonic,
                    _ => Schedule::Uniform,
                };
                if self.batches.iter().any(|b| expected(b) != schedule) {
                    return Err(format!(
                        "schedule '{value}' conflicts with batches (0 selects harmonic, \
                         a finite limit selects uniform)"
                    ));
                }
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut config = Self::default();
        config.apply(text)?;
        Ok(config)
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            self.set(key.trim(), value).map_err(err)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: &str| Err(HarnessError::Invalid(m.into()));
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.stages == 0 {
            return invalid("stages must be at least 1");
        }
        if self.policies.is_empty() {
            return invalid("at least one policy is required");
        }
        if self.particles.is_empty() || self.particles.contains(&0) {
            return invalid("particle counts must be positive");
        }
        if self.batches.is_empty() {
            return invalid("at least one batch limit is required");
        }
        if !(self.tolerance > 0.0) {
            return invalid("tolerance must be positive");
        }
        if self.horizon == Some(0) {
            return invalid("horizon must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        if self.policies.contains(&Policy::PfDynamic) {
            for &b in &self.batches {
                self.plan(b).validate()?;
            }
        }
        Ok(())
    }

    /// Sampling plan for one batch limit.
    pub fn plan(&self, batches: u64) -> SamplingPlan {
        let (schedule, max_batches) = match batches {
            0 => (Schedule::Harmonic, None),
            b => (Schedule::Uniform, Some(b)),
        };
        SamplingPlan {
            epsilon: self.epsilon,
            delta: self.delta,
            max_batches,
            batch_size: self.batch_size,
            schedule,
            stop_threshold: self.stop_threshold,
            look_limit: self.look_limit,
        }
    }
}
