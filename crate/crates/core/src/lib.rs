//! Value-directed particle filtering for POMDP belief monitoring.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: flat POMDPs, the exact Bayes filter and sampling primitives;
//! * [`valuefn`]: alpha-vector value functions and a small exact solver;
//! * [`filter`]: weighted particle sets, plain sequential importance sampling
//!   and the evidence-integration filter;
//! * [`vds`]: Hoeffding sample sizing, the batch-sequential vector selector
//!   and the decision-quality error bounds;
//! * [`harness`]: the experiment runner behind the `vdmon` command.

pub mod filter;
pub mod fixtures;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod valuefn;
pub mod vds;

pub use filter::{FilterError, ParticleSet};
pub use model::{Belief, ModelError, Pomdp};
pub use valuefn::{AlphaSet, AlphaVector, Objective, Prune};
pub use vds::{SamplingPlan, SelectionReport};
