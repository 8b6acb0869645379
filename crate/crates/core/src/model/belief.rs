use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{sample_categorical, ModelError};

/// A probability vector over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidBelief("empty belief".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(ModelError::InvalidBelief(format!("entry {p} is negative")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > super::STOCHASTIC_TOLERANCE {
            return Err(ModelError::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ModelError> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(total > 0.0) {
            return Err(ModelError::InvalidBelief(
                "weights must be non-negative with positive total".into(),
            ));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(num_states: usize) -> Self {
        Self(vec![1.0 / num_states as f64; num_states])
    }

    pub fn point(num_states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; num_states];
        probs[state] = 1.0;
        Self(probs)
    }

    /// Uniform draw from the simplex (symmetric Dirichlet with unit
    /// concentration), via normalized exponential variates.
    pub fn random<R: Rng + ?Sized>(num_states: usize, rng: &mut R) -> Self {
        let draws: Vec<f64> = (0..num_states)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                e
            })
            .collect();
        let total: f64 = draws.iter().sum();
        Self(draws.into_iter().map(|e| e / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.0, rng)
    }

    /// Total-variation distance.
    pub fn tv_distance(&self, other: &Belief) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validation() {
        assert!(Belief::new(vec![0.5, 0.5]).is_ok());
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![]).is_err());
        assert!(Belief::from_weights(vec![0.0, 0.0]).is_err());
        assert_eq!(
            Belief::from_weights(vec![1.0, 3.0]).unwrap().probs(),
            &[0.25, 0.75]
        );
    }

    #[test]
    fn random_beliefs_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in 1..10 {
            let b = Belief::random(n, &mut rng);
            assert!(Belief::new(b.probs().to_vec()).is_ok());
        }
    }

    #[test]
    fn flat_dirichlet_marginal_mean() {
        // Each coordinate of a flat Dirichlet on 4 states has mean 1/4.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| Belief::random(4, &mut rng).probs()[2])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 0.005);
    }
}
