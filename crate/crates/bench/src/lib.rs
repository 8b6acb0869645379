//! Shared setup for the criterion benches.

use vdmon::valuefn::{Objective, Prune, Solver};
use vdmon::{AlphaSet, Pomdp};

/// A bundled model with its stationary maximizing set.
pub fn solved(name: &str) -> (Pomdp, AlphaSet) {
    let model = vdmon::fixtures::by_name(name).expect("bundled model");
    let set = Solver::new(Objective::Maximize, Prune::Lp)
        .solve_stationary(&model)
        .expect("model solves");
    (model, set)
}
