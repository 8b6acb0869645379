//! Flat POMDP models, exact belief dynamics, and the sampling primitives the
//! filters are built from.
//!
//! Tables are stored densely:
//!
//! * transition `T(s, a)(s')` is indexed `[a][s][s']`,
//! * observation `O(a, s')(o)` is indexed `[a][s'][o]` (no dependence on the
//!   start state),
//! * reward `R(s, a)` is indexed `[s][a]`.

mod belief;
mod parse;

use rand::Rng;
use thiserror::Error;

pub use belief::Belief;
pub use parse::{parse_pomdp, write_pomdp};

/// Tolerance on row sums of stochastic tables.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Evidence whose probability falls at or below this is treated as impossible.
pub const IMPOSSIBLE_EVIDENCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{table} row (action {action}, state {row}) sums to {sum}, expected 1")]
    NotStochastic {
        table: &'static str,
        action: usize,
        row: usize,
        sum: f64,
    },
    #[error("{table} entry {value} (action {action}, state {row}) is outside [0, 1]")]
    ProbabilityOutOfRange {
        table: &'static str,
        action: usize,
        row: usize,
        value: f64,
    },
    #[error("discount {0} is outside [0, 1)")]
    Discount(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("observation {observation} is impossible after action {action}")]
    ImpossibleEvidence { action: usize, observation: usize },
}

/// Optional human-readable names carried over from a model file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labels {
    pub states: Option<Vec<String>>,
    pub actions: Option<Vec<String>>,
    pub observations: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    labels: Labels,
}

fn check_rows(
    table: &'static str,
    data: &[f64],
    rows_per_action: usize,
    width: usize,
) -> Result<(), ModelError> {
    for (r, row) in data.chunks(width).enumerate() {
        let (action, state) = (r / rows_per_action, r % rows_per_action);
        if let Some(&value) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ModelError::ProbabilityOutOfRange {
                table,
                action,
                row: state,
                value,
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(ModelError::NotStochastic {
                table,
                action,
                row: state,
                sum,
            });
        }
    }
    Ok(())
}

impl Pomdp {
    /// Builds a model from dense tables, rejecting anything that is not a
    /// proper stochastic model. Rows are never renormalized.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_observations: usize,
        transition: Vec<f64>,
        observation: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Result<Self, ModelError> {
        if num_states == 0 || num_actions == 0 || num_observations == 0 {
            return Err(ModelError::Dimension(
                "states, actions and observations must all be non-empty".into(),
            ));
        }
        let expect = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(ModelError::Dimension(format!(
                    "{name} table has {got} entries, expected {want}"
                )))
            }
        };
        expect(
            "transition",
            transition.len(),
            num_actions * num_states * num_states,
        )?;
        expect(
            "observation",
            observation.len(),
            num_actions * num_states * num_observations,
        )?;
        expect("reward", reward.len(), num_states * num_actions)?;
        if !(0.0..1.0).contains(&discount) {
            return Err(ModelError::Discount(discount));
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(ModelError::Dimension(format!("non-finite reward {r}")));
        }
        check_rows("T", &transition, num_states, num_states)?;
        check_rows("O", &observation, num_states, num_observations)?;
        Ok(Self {
            num_states,
            num_actions,
            num_observations,
            transition,
            observation,
            reward,
            discount,
            labels: Labels::default(),
        })
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self, ModelError> {
        let check = |names: &Option<Vec<String>>, n: usize, what: &str| match names {
            Some(v) if v.len() != n => Err(ModelError::Dimension(format!(
                "{} {what} names for {n} {what}",
                v.len()
            ))),
            _ => Ok(()),
        };
        check(&labels.states, self.num_states, "state")?;
        check(&labels.actions, self.num_actions, "action")?;
        check(&labels.observations, self.num_observations, "observation")?;
        self.labels = labels;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    /// `T(s, a)`: distribution over next states.
    pub fn transition_row(&self, action: usize, state: usize) -> &[f64] {
        let n = self.num_states;
        let start = (action * n + state) * n;
        &self.transition[start..start + n]
    }

    /// `O(a, s')`: distribution over observations on arrival in `next_state`.
    pub fn observation_row(&self, action: usize, next_state: usize) -> &[f64] {
        let z = self.num_observations;
        let start = (action * self.num_states + next_state) * z;
        &self.observation[start..start + z]
    }

    pub fn transition(&self, state: usize, action: usize, next_state: usize) -> f64 {
        self.transition_row(action, state)[next_state]
    }

    pub fn observation(&self, action: usize, next_state: usize, obs: usize) -> f64 {
        self.observation[(action * self.num_states + next_state) * self.num_observations + obs]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    pub fn min_reward(&self) -> f64 {
        self.reward.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Immediate-reward vector of one action, indexed by state.
    pub fn reward_vector(&self, action: usize) -> Vec<f64> {
        (0..self.num_states).map(|s| self.reward(s, action)).collect()
    }

    /// A copy of the model with every reward negated.
    pub fn negated_rewards(&self) -> Self {
        let mut m = self.clone();
        m.reward.iter_mut().for_each(|r| *r = -*r);
        m
    }

    /// `Pr(o | s, a) = sum_{s'} T(s, a)(s') O(a, s')(o)`.
    pub fn evidence_likelihood(&self, state: usize, action: usize, obs: usize) -> f64 {
        self.transition_row(action, state)
            .iter()
            .enumerate()
            .map(|(next, &t)| t * self.observation(action, next, obs))
            .sum()
    }

    fn predicted(&self, belief: &Belief, action: usize) -> Vec<f64> {
        let mut next = vec![0.0; self.num_states];
        for (s, &p) in belief.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (acc, &t) in next.iter_mut().zip(self.transition_row(action, s)) {
                *acc += p * t;
            }
        }
        next
    }

    /// `Pr(o | b, a)`, the normalizer of the Bayes update.
    pub fn obs_probability(&self, belief: &Belief, action: usize, obs: usize) -> f64 {
        self.check_belief(belief);
        self.predicted(belief, action)
            .iter()
            .enumerate()
            .map(|(next, &p)| p * self.observation(action, next, obs))
            .sum()
    }

    /// Exact Bayes update `T(b, a, o)`.
    pub fn belief_update(
        &self,
        belief: &Belief,
        action: usize,
        obs: usize,
    ) -> Result<Belief, ModelError> {
        self.check_belief(belief);
        let mut next = self.predicted(belief, action);
        for (s, p) in next.iter_mut().enumerate() {
            *p *= self.observation(action, s, obs);
        }
        let norm: f64 = next.iter().sum();
        if norm <= IMPOSSIBLE_EVIDENCE {
            return Err(ModelError::ImpossibleEvidence {
                action,
                observation: obs,
            });
        }
        next.iter_mut().for_each(|p| *p /= norm);
        Ok(Belief::from_normalized(next))
    }

    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> usize {
        sample_categorical(self.transition_row(action, state), rng)
    }

    /// Draws `s'` with probability proportional to `T(s, a)(s') O(a, s')(o)`.
    pub fn sample_posterior_state<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        obs: usize,
        rng: &mut R,
    ) -> Result<usize, ModelError> {
        let weights = self.posterior_weights(state, action, obs)?;
        Ok(sample_categorical(&weights, rng))
    }

    /// Unnormalized posterior over next states for one start state.
    pub(crate) fn posterior_weights(
        &self,
        state: usize,
        action: usize,
        obs: usize,
    ) -> Result<Vec<f64>, ModelError> {
        let weights: Vec<f64> = self
            .transition_row(action, state)
            .iter()
            .enumerate()
            .map(|(next, &t)| t * self.observation(action, next, obs))
            .collect();
        if weights.iter().sum::<f64>() <= IMPOSSIBLE_EVIDENCE {
            return Err(ModelError::ImpossibleEvidence {
                action,
                observation: obs,
            });
        }
        Ok(weights)
    }

    /// One environment step. Consumes exactly two uniforms from `rng`, so
    /// streams stay aligned across policies that pick different actions.
    pub fn simulate_step<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> (usize, usize, f64) {
        let next = self.sample_transition(state, action, rng);
        let obs = sample_categorical(self.observation_row(action, next), rng);
        (next, obs, self.reward(state, action))
    }

    fn check_belief(&self, belief: &Belief) {
        assert_eq!(
            belief.len(),
            self.num_states,
            "belief dimension does not match the model"
        );
    }
}

/// Inverse-CDF draw from unnormalized non-negative weights using one uniform.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiger() -> Pomdp {
        parse_pomdp(crate::fixtures::TIGER).unwrap()
    }

    /// Two states, one action, observation reveals the state.
    fn deterministic() -> Pomdp {
        Pomdp::new(
            2,
            1,
            2,
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 2.0],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn rejects_substochastic_rows() {
        let err = Pomdp::new(
            2,
            1,
            1,
            vec![0.9, 0.0, 0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            0.5,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::NotStochastic {
                table: "T",
                action: 0,
                row: 0,
                ..
            }
        ));
    }

    #[test]
    fn rejects_bad_discount() {
        let err = Pomdp::new(1, 1, 1, vec![1.0], vec![1.0], vec![0.0], 1.0).unwrap_err();
        assert_eq!(err, ModelError::Discount(1.0));
    }

    #[test]
    fn tiger_listen_update() {
        let m = tiger();
        let b = m.belief_update(&Belief::uniform(2), 0, 0).unwrap();
        assert!((b.probs()[0] - 0.85).abs() < 1e-12);
        assert!((b.probs()[1] - 0.15).abs() < 1e-12);
        let corner = Belief::point(2, 0);
        assert!((m.obs_probability(&corner, 0, 0) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn deterministic_update_is_one_hot() {
        let m = deterministic();
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        // From either state the action swaps, and obs 1 reveals state 1.
        let post = m.belief_update(&b, 0, 1).unwrap();
        assert_eq!(post.probs(), &[0.0, 1.0]);
        let err = m.belief_update(&Belief::point(2, 0), 0, 0).unwrap_err();
        assert!(matches!(err, ModelError::ImpossibleEvidence { .. }));
    }

    #[test]
    fn uniform_observations_are_uninformative() {
        let m = tiger();
        let b = Belief::new(vec![0.2, 0.8]).unwrap();
        for a in 1..3 {
            for o in 0..2 {
                assert!((m.obs_probability(&b, a, o) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transition_frequencies() {
        let m = tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| m.sample_transition(0, 1, &mut rng) == 0)
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
        assert!((0..100).all(|_| m.sample_transition(1, 0, &mut rng) == 1));
    }

    #[test]
    fn posterior_draw_on_tiger_stays_put() {
        let m = tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(m.sample_posterior_state(0, 0, 0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let m = tiger();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|i| m.simulate_step(i % 2, i % 3, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn simulate_step_reward_is_contractual() {
        let m = tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (_, _, r) = m.simulate_step(0, 1, &mut rng);
            assert_eq!(r, -100.0);
        }
        let d = deterministic();
        assert_eq!(d.simulate_step(0, 0, &mut rng), (1, 1, 1.0));
    }
}
