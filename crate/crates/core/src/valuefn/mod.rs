//! Piecewise-linear convex value functions represented by alpha-vectors.

mod io;
mod lp;
mod solve;

use std::collections::HashSet;

use thiserror::Error;

use crate::model::{Belief, Pomdp};

pub use io::{parse_alpha, parse_alpha_with, write_alpha};
pub use lp::{is_dominated, DOMINATION_TOLERANCE};
pub use solve::{solve, Solver, DEFAULT_CROSS_SUM_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueFnError {
    #[error("alpha set is empty")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("duplicate alpha-vector at position {0}")]
    Duplicate(usize),
    #[error("action {action} is out of range for a model with {num_actions} actions")]
    Action { action: usize, num_actions: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("cross-sum of {size} vectors at horizon {horizon} exceeds the cap of {cap}")]
    CapExceeded {
        size: usize,
        horizon: usize,
        cap: usize,
    },
    #[error("value iteration did not converge within {0} backups")]
    NotConverged(usize),
    #[error("tight h bound needs a minimizing alpha set")]
    MissingWorstSet,
    #[error("internal error: {0}")]
    Internal(String),
}

/// Whether a set represents best-case (`max`) or worst-case (`min`) values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prune {
    None,
    Pointwise,
    #[default]
    Lp,
}

impl std::str::FromStr for Prune {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Prune::None),
            "pointwise" => Ok(Prune::Pointwise),
            "lp" => Ok(Prune::Lp),
            _ => Err(format!("unknown prune level '{s}' (none|pointwise|lp)")),
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Objective::Maximize),
            "min" => Ok(Objective::Minimize),
            _ => Err(format!("unknown mode '{s}' (max|min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    /// First action of the vector's conditional plan.
    pub action: usize,
    /// Ordinal within the owning set.
    pub id: usize,
}

impl AlphaVector {
    pub fn dot(&self, belief: &Belief) -> f64 {
        belief.dot(&self.values)
    }
}

/// `max_s alpha(s) - min_s alpha(s)`.
pub fn alpha_range(alpha: &AlphaVector) -> f64 {
    range_of(&alpha.values)
}

pub(crate) fn range_of(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSet {
    vectors: Vec<AlphaVector>,
    num_states: usize,
    horizon: Horizon,
    objective: Objective,
}

impl AlphaSet {
    /// Builds a set from `(values, action)` pairs; ids follow input order.
    pub fn new(
        vectors: Vec<(Vec<f64>, usize)>,
        horizon: Horizon,
        objective: Objective,
    ) -> Result<Self, ValueFnError> {
        let num_states = vectors.first().ok_or(ValueFnError::Empty)?.0.len();
        if num_states == 0 {
            return Err(ValueFnError::Dimension("zero-length vector".into()));
        }
        let mut out: Vec<AlphaVector> = Vec::with_capacity(vectors.len());
        let mut seen: HashSet<(usize, Vec<u64>)> = HashSet::with_capacity(vectors.len());
        for (id, (values, action)) in vectors.into_iter().enumerate() {
            if values.len() != num_states {
                return Err(ValueFnError::Dimension(format!(
                    "vector {id} has {} entries, expected {num_states}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ValueFnError::Dimension(format!(
                    "vector {id} has a non-finite entry"
                )));
            }
            // `+ 0.0` maps -0.0 to 0.0 so that equal values share a key.
            let bits = values.iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen.insert((action, bits)) {
                return Err(ValueFnError::Duplicate(id));
            }
            out.push(AlphaVector { values, action, id });
        }
        Ok(Self {
            vectors: out,
            num_states,
            horizon,
            objective,
        })
    }

    pub fn vectors(&self) -> &[AlphaVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn get(&self, id: usize) -> &AlphaVector {
        &self.vectors[id]
    }

    /// Checks that every vector matches `model`'s state and action counts.
    pub fn check_model(&self, model: &Pomdp) -> Result<(), ValueFnError> {
        if self.num_states != model.num_states() {
            return Err(ValueFnError::Dimension(format!(
                "alpha vectors have {} entries, model has {} states",
                self.num_states,
                model.num_states()
            )));
        }
        if let Some(v) = self
            .vectors
            .iter()
            .find(|v| v.action >= model.num_actions())
        {
            return Err(ValueFnError::Action {
                action: v.action,
                num_actions: model.num_actions(),
            });
        }
        Ok(())
    }

    /// Value of `b` and the id of the vector attaining it (`ma(b)`); the
    /// extremum is a max for maximizing sets and a min for minimizing ones.
    /// Ties go to the lowest id.
    pub fn value_and_ma(&self, belief: &Belief) -> (f64, usize) {
        self.value_and_ma_probs(belief.probs())
    }

    pub(crate) fn value_and_ma_probs(&self, probs: &[f64]) -> (f64, usize) {
        assert_eq!(probs.len(), self.num_states, "belief dimension mismatch");
        let mut best = (f64::NAN, 0);
        for v in &self.vectors {
            let value: f64 = probs.iter().zip(&v.values).map(|(p, a)| p * a).sum();
            let better = match self.objective {
                Objective::Maximize => value > best.0,
                Objective::Minimize => value < best.0,
            };
            if best.0.is_nan() || better {
                best = (value, v.id);
            }
        }
        best
    }

    pub fn value(&self, belief: &Belief) -> f64 {
        self.value_and_ma(belief).0
    }

    /// Action prescribed at `b`: `A(ma(b))`.
    pub fn action(&self, belief: &Belief) -> usize {
        self.vectors[self.value_and_ma(belief).1].action
    }

    pub fn max_range(&self) -> f64 {
        self.vectors
            .iter()
            .map(alpha_range)
            .fold(0.0, f64::max)
    }

    /// Copy with every entry shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            v.values.iter_mut().for_each(|x| *x += c);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HBoundMode<'a> {
    /// `max_a max_s alpha(s) - beta min_s R(s) / (1 - beta)`.
    Loose,
    /// `max_s (max_a alpha(s) - min_w w(s))` over a minimizing set `w`.
    Tight(Option<&'a AlphaSet>),
}

/// Upper bound `h` on the value lost by arbitrary suboptimal behavior.
///
/// The loose form is computed literally, with `beta` multiplying only the
/// reward term. The tight form bounds `max_b V*(b) - V_worst(b)`: the
/// difference of a convex and a concave function is convex, so its maximum
/// over the simplex sits at a vertex.
pub fn h_bound(model: &Pomdp, set: &AlphaSet, mode: HBoundMode<'_>) -> Result<f64, ValueFnError> {
    match mode {
        HBoundMode::Loose => {
            let top = set
                .vectors
                .iter()
                .flat_map(|v| v.values.iter().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            let beta = model.discount();
            Ok(top - beta * model.min_reward() / (1.0 - beta))
        }
        HBoundMode::Tight(worst) => {
            let worst = match worst {
                Some(w) if w.objective == Objective::Minimize => w,
                _ => return Err(ValueFnError::MissingWorstSet),
            };
            if worst.num_states != set.num_states {
                return Err(ValueFnError::Dimension(
                    "worst set has a different state count".into(),
                ));
            }
            Ok((0..set.num_states)
                .map(|s| {
                    let hi = set
                        .vectors
                        .iter()
                        .map(|v| v.values[s])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let lo = worst
                        .vectors
                        .iter()
                        .map(|v| v.values[s])
                        .fold(f64::INFINITY, f64::min);
                    hi - lo
                })
                .fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair() -> AlphaSet {
        AlphaSet::new(
            vec![(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)],
            Horizon::Finite(1),
            Objective::Maximize,
        )
        .unwrap()
    }

    #[test]
    fn maximizing_vector_and_ties() {
        let set = pair();
        let (v, id) = set.value_and_ma(&Belief::new(vec![0.7, 0.3]).unwrap());
        assert!((v - 0.7).abs() < 1e-15);
        assert_eq!(id, 0);
        assert_eq!(set.value_and_ma(&Belief::uniform(2)), (0.5, 0));
        let single = AlphaSet::new(
            vec![(vec![3.0, -1.0], 2)],
            Horizon::Stationary,
            Objective::Maximize,
        )
        .unwrap();
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(single.value_and_ma(&b), (0.0, 0));
    }

    #[test]
    fn minimizing_sets_take_the_minimum() {
        let set = AlphaSet::new(
            vec![(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)],
            Horizon::Finite(1),
            Objective::Minimize,
        )
        .unwrap();
        assert_eq!(
            set.value_and_ma(&Belief::new(vec![0.7, 0.3]).unwrap()),
            (0.3, 1)
        );
    }

    #[test]
    fn set_invariants() {
        assert_eq!(
            AlphaSet::new(vec![], Horizon::Stationary, Objective::Maximize),
            Err(ValueFnError::Empty)
        );
        assert!(matches!(
            AlphaSet::new(
                vec![(vec![1.0], 0), (vec![1.0, 2.0], 0)],
                Horizon::Stationary,
                Objective::Maximize
            ),
            Err(ValueFnError::Dimension(_))
        ));
        assert_eq!(
            AlphaSet::new(
                vec![(vec![1.0], 0), (vec![1.0], 0)],
                Horizon::Stationary,
                Objective::Maximize
            ),
            Err(ValueFnError::Duplicate(1))
        );
        // Same values under different actions are distinct vectors.
        assert!(AlphaSet::new(
            vec![(vec![1.0], 0), (vec![1.0], 1)],
            Horizon::Stationary,
            Objective::Maximize
        )
        .is_ok());
    }

    #[test]
    fn ranges() {
        let v = |values: Vec<f64>| AlphaVector {
            values,
            action: 0,
            id: 0,
        };
        assert_eq!(alpha_range(&v(vec![4.0, 4.0, 4.0])), 0.0);
        assert_eq!(alpha_range(&v(vec![10.0, -100.0])), 110.0);
    }

    fn model_with_rewards(rewards: [f64; 2], beta: f64) -> Pomdp {
        Pomdp::new(
            2,
            1,
            1,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 1.0],
            rewards.to_vec(),
            beta,
        )
        .unwrap()
    }

    #[test]
    fn loose_h_bound_as_printed() {
        let set = AlphaSet::new(
            vec![(vec![10.0, 2.0], 0), (vec![-3.0, 5.0], 0)],
            Horizon::Stationary,
            Objective::Maximize,
        )
        .unwrap();
        let h = h_bound(&model_with_rewards([0.0, 3.0], 0.9), &set, HBoundMode::Loose).unwrap();
        assert!((h - 10.0).abs() < 1e-12);
        let h = h_bound(&model_with_rewards([1.0, 1.0], 0.9), &set, HBoundMode::Loose).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tight_h_bound() {
        let model = model_with_rewards([0.0, 0.0], 0.5);
        let max = AlphaSet::new(
            vec![(vec![2.0, 1.0], 0)],
            Horizon::Stationary,
            Objective::Maximize,
        )
        .unwrap();
        let min = AlphaSet::new(
            vec![(vec![2.0, 1.0], 0)],
            Horizon::Stationary,
            Objective::Minimize,
        )
        .unwrap();
        assert_eq!(
            h_bound(&model, &max, HBoundMode::Tight(Some(&min))).unwrap(),
            0.0
        );
        assert_eq!(
            h_bound(&model, &max, HBoundMode::Tight(None)),
            Err(ValueFnError::MissingWorstSet)
        );
        assert_eq!(
            h_bound(&model, &max, HBoundMode::Tight(Some(&max))),
            Err(ValueFnError::MissingWorstSet)
        );
    }

    fn arb_set_and_belief() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64)> {
        (2usize..6, 1usize..6).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, n), k),
                prop::collection::vec(0.01f64..1.0, n),
                -100.0f64..100.0,
            )
        })
    }

    proptest! {
        #[test]
        fn constant_shift_moves_value_not_argmax((vectors, weights, c) in arb_set_and_belief()) {
            let pairs: Vec<_> = vectors.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
            let set = AlphaSet::new(pairs, Horizon::Stationary, Objective::Maximize).unwrap();
            let b = Belief::from_weights(weights).unwrap();
            let (v0, id0) = set.value_and_ma(&b);
            let (v1, id1) = set.shifted(c).value_and_ma(&b);
            prop_assert!((v1 - v0 - c).abs() < 1e-9);
            // The argmax can only move when two vectors are within rounding of each other.
            if id0 != id1 {
                let gap = (set.get(id0).dot(&b) - set.get(id1).dot(&b)).abs();
                prop_assert!(gap < 1e-9);
            }
        }

        #[test]
        fn range_is_shift_invariant(values in prop::collection::vec(-1e3f64..1e3, 1..8), c in -1e3f64..1e3) {
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            prop_assert!((range_of(&values) - range_of(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn value_function_is_convex((vectors, w1, _) in arb_set_and_belief(), seed in 0u64..1000) {
            let n = w1.len();
            let pairs: Vec<_> = vectors.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
            let set = AlphaSet::new(pairs, Horizon::Stationary, Objective::Maximize).unwrap();
            let b1 = Belief::from_weights(w1).unwrap();
            let w2: Vec<f64> = (0..n).map(|i| ((seed as usize * 31 + i * 17) % 97) as f64 + 1.0).collect();
            let b2 = Belief::from_weights(w2).unwrap();
            for lambda in [0.25, 0.5, 0.75] {
                let mix: Vec<f64> = b1.probs().iter().zip(b2.probs()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
                let mixed = set.value(&Belief::from_weights(mix).unwrap());
                prop_assert!(mixed <= lambda * set.value(&b1) + (1.0 - lambda) * set.value(&b2) + 1e-9);
            }
        }
    }
}
