//! Experiment runner: simulated episodes under competing monitoring policies,
//! loss against the optimal value, and the audits behind `vdmon check`.

mod config;
mod diagnostics;
mod experiment;
pub mod synthetic;
mod trial;

pub use config::{ExperimentConfig, Policy};
pub use diagnostics::{
    fact1_check, fact1_rollout, filter_diagnostics, fixed_epsilon, report_2epsilon,
    Fact1Report, FilterDiagnostics, RolloutActions,
};
pub use experiment::{
    load_model, paired_difference, run_experiment, solve_for, summarize, summary_table,
    write_csv, Cell, CellResult, CellSummary, Experiment, CSV_HEADER,
};
pub use trial::{
    recover_belief, run_trial, StageLog, TrialRecord, TrialStreams, EXACT_RECOVERY_LIMIT,
};

use thiserror::Error;

use crate::filter::FilterError;
use crate::model::ModelError;
use crate::valuefn::ValueFnError;
use crate::vds::VdsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    ValueFn(#[from] ValueFnError),
    #[error(transparent)]
    Vds(#[from] VdsError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}
