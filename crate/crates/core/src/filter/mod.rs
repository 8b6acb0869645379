//! Weighted particle beliefs and the two filtering procedures: plain
//! sequential importance sampling and the evidence-integration filter.
//!
//! The evidence-integration filter first reweights the time-`t` particles by
//! `Pr(o | s, a)` (exact inference under the particle prior), resamples
//! ancestors from that reweighted set, and then draws each successor from its
//! exact posterior `Pr(s' | s, a, o)`. Its output is an equally weighted,
//! unbiased sample of `T(b~, a, o)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::model::{sample_categorical, Belief, ModelError, Pomdp, IMPOSSIBLE_EVIDENCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("observation {observation} is impossible under the particle belief after action {action}")]
    ImpossibleEvidence { action: usize, observation: usize },
    #[error("every propagated particle has zero weight (action {action}, observation {observation})")]
    Depletion { action: usize, observation: usize },
    #[error("invalid particle set: {0}")]
    Invalid(String),
    #[error("at least one output particle is required")]
    NoParticles,
}

impl From<ModelError> for FilterError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ImpossibleEvidence {
                action,
                observation,
            } => FilterError::ImpossibleEvidence {
                action,
                observation,
            },
            other => FilterError::Invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: usize,
    pub weight: f64,
}

/// Ancestor resampling scheme for [`ei_step_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Independent draws with replacement.
    #[default]
    Multinomial,
    /// One uniform offset, evenly spaced points.
    Systematic,
}

impl std::str::FromStr for Resampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multinomial" => Ok(Self::Multinomial),
            "systematic" => Ok(Self::Systematic),
            _ => Err(format!(
                "unknown resampling '{s}' (multinomial|systematic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    total_weight: f64,
    num_states: usize,
}

impl ParticleSet {
    pub fn new(num_states: usize, particles: Vec<Particle>) -> Result<Self, FilterError> {
        if particles.is_empty() {
            return Err(FilterError::Invalid("no particles".into()));
        }
        if let Some(p) = particles
            .iter()
            .find(|p| p.state >= num_states || !(p.weight.is_finite() && p.weight >= 0.0))
        {
            return Err(FilterError::Invalid(format!(
                "particle {p:?} is out of range for {num_states} states"
            )));
        }
        let total_weight: f64 = particles.iter().map(|p| p.weight).sum();
        if !(total_weight > 0.0) {
            return Err(FilterError::Invalid("total weight is zero".into()));
        }
        Ok(Self {
            particles,
            total_weight,
            num_states,
        })
    }

    /// Unit-weight particles on the given states.
    pub fn equally_weighted(num_states: usize, states: Vec<usize>) -> Result<Self, FilterError> {
        Self::new(
            num_states,
            states
                .into_iter()
                .map(|state| Particle { state, weight: 1.0 })
                .collect(),
        )
    }

    /// `n` unit-weight particles drawn i.i.d. from `belief`.
    pub fn sample<R: Rng + ?Sized>(belief: &Belief, n: usize, rng: &mut R) -> Result<Self, FilterError> {
        if n == 0 {
            return Err(FilterError::NoParticles);
        }
        let index = WeightedIndex::new(belief.probs())
            .map_err(|e| FilterError::Invalid(e.to_string()))?;
        Self::equally_weighted(belief.len(), (0..n).map(|_| index.sample(rng)).collect())
    }

    /// One particle per supported state, weighted by its probability. This
    /// represents `belief` exactly.
    pub fn from_belief(belief: &Belief) -> Self {
        let particles = belief
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(state, &weight)| Particle { state, weight })
            .collect();
        Self::new(belief.len(), particles).expect("a belief has positive mass")
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `b~(s) = sum{w_i : s_i = s} / w`.
    pub fn to_belief(&self) -> Belief {
        let mut probs = vec![0.0; self.num_states];
        for p in &self.particles {
            probs[p.state] += p.weight;
        }
        probs.iter_mut().for_each(|x| *x /= self.total_weight);
        Belief::from_normalized(probs)
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        self.total_weight * self.total_weight / sq
    }
}

pub fn effective_sample_size(particles: &ParticleSet) -> f64 {
    particles.effective_sample_size()
}

pub fn to_belief(particles: &ParticleSet) -> Belief {
    particles.to_belief()
}

/// Plain sequential importance sampling: draw `s ~ b~`, `s' ~ T(s, a)`, and
/// weight the new particle by `O(a, s')(o)`, `n_out` times.
pub fn sis_step<R: Rng + ?Sized>(
    model: &Pomdp,
    particles: &ParticleSet,
    action: usize,
    obs: usize,
    n_out: usize,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    if n_out == 0 {
        return Err(FilterError::NoParticles);
    }
    let prior = particles.to_belief();
    let index =
        WeightedIndex::new(prior.probs()).map_err(|e| FilterError::Invalid(e.to_string()))?;
    let out: Vec<Particle> = (0..n_out)
        .map(|_| {
            let s = index.sample(rng);
            let next = model.sample_transition(s, action, rng);
            Particle {
                state: next,
                weight: model.observation(action, next, obs),
            }
        })
        .collect();
    if out.iter().all(|p| p.weight == 0.0) {
        return Err(FilterError::Depletion {
            action,
            observation: obs,
        });
    }
    ParticleSet::new(particles.num_states, out)
}

/// Multiplies each weight by `Pr(o | s_i, a)` and renormalizes to total
/// weight one: the exact posterior over time-`t` states under the particle
/// prior.
pub fn reweight(
    model: &Pomdp,
    particles: &ParticleSet,
    action: usize,
    obs: usize,
) -> Result<ParticleSet, FilterError> {
    let mut likelihood: Vec<Option<f64>> = vec![None; particles.num_states];
    let mut out: Vec<Particle> = particles
        .particles
        .iter()
        .map(|p| {
            let l = *likelihood[p.state]
                .get_or_insert_with(|| model.evidence_likelihood(p.state, action, obs));
            Particle {
                state: p.state,
                weight: p.weight * l,
            }
        })
        .collect();
    let total: f64 = out.iter().map(|p| p.weight).sum();
    if total / particles.total_weight <= IMPOSSIBLE_EVIDENCE {
        return Err(FilterError::ImpossibleEvidence {
            action,
            observation: obs,
        });
    }
    out.iter_mut().for_each(|p| p.weight /= total);
    ParticleSet::new(particles.num_states, out)
}

/// Draws i.i.d. successors from `T(b~, a, o)`: ancestors from the
/// reweighted prior, successors from their exact one-step posterior.
pub(crate) struct EvidenceSampler<'a> {
    model: &'a Pomdp,
    action: usize,
    obs: usize,
    reweighted: ParticleSet,
    ancestors: WeightedIndex<f64>,
    posterior: Vec<Option<Vec<f64>>>,
}

impl<'a> EvidenceSampler<'a> {
    pub(crate) fn new(
        model: &'a Pomdp,
        particles: &ParticleSet,
        action: usize,
        obs: usize,
    ) -> Result<Self, FilterError> {
        let reweighted = reweight(model, particles, action, obs)?;
        let ancestors = WeightedIndex::new(reweighted.particles.iter().map(|p| p.weight))
            .map_err(|e| FilterError::Invalid(e.to_string()))?;
        Ok(Self {
            model,
            action,
            obs,
            reweighted,
            ancestors,
            posterior: vec![None; particles.num_states],
        })
    }

    fn successor<R: Rng + ?Sized>(&mut self, ancestor: usize, rng: &mut R) -> Result<usize, FilterError> {
        let state = self.reweighted.particles[ancestor].state;
        if self.posterior[state].is_none() {
            self.posterior[state] = Some(self.model.posterior_weights(state, self.action, self.obs)?);
        }
        let weights = self.posterior[state].as_deref().expect("filled above");
        Ok(sample_categorical(weights, rng))
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize, FilterError> {
        let ancestor = self.ancestors.sample(rng);
        self.successor(ancestor, rng)
    }

    fn draw_systematic<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<Vec<usize>, FilterError> {
        let offset: f64 = rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cumulative = 0.0;
        let mut i = 0;
        let last = self.reweighted.particles.len() - 1;
        for k in 0..n {
            let point = offset + k as f64 / n as f64;
            while i < last && cumulative + self.reweighted.particles[i].weight <= point {
                cumulative += self.reweighted.particles[i].weight;
                i += 1;
            }
            out.push(self.successor(i, rng)?);
        }
        Ok(out)
    }
}

/// Evidence-integration step with multinomial ancestor resampling.
pub fn ei_step<R: Rng + ?Sized>(
    model: &Pomdp,
    particles: &ParticleSet,
    action: usize,
    obs: usize,
    n_out: usize,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    ei_step_with(model, particles, action, obs, n_out, Resampling::Multinomial, rng)
}

pub fn ei_step_with<R: Rng + ?Sized>(
    model: &Pomdp,
    particles: &ParticleSet,
    action: usize,
    obs: usize,
    n_out: usize,
    resampling: Resampling,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    if n_out == 0 {
        return Err(FilterError::NoParticles);
    }
    let mut sampler = EvidenceSampler::new(model, particles, action, obs)?;
    let states = match resampling {
        Resampling::Multinomial => (0..n_out)
            .map(|_| sampler.draw(rng))
            .collect::<Result<Vec<_>, _>>()?,
        Resampling::Systematic => sampler.draw_systematic(n_out, rng)?,
    };
    ParticleSet::equally_weighted(particles.num_states, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiger;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize, particles: &[(usize, f64)]) -> ParticleSet {
        ParticleSet::new(
            n,
            particles
                .iter()
                .map(|&(state, weight)| Particle { state, weight })
                .collect(),
        )
        .unwrap()
    }

    /// Swap dynamics with a revealing observation.
    fn deterministic() -> Pomdp {
        Pomdp::new(
            2,
            1,
            2,
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn to_belief_sums_weights() {
        assert_eq!(set(2, &[(0, 1.0), (1, 1.0), (1, 2.0)]).to_belief().probs(), &[0.25, 0.75]);
        assert_eq!(set(3, &[(2, 0.3), (2, 5.0)]).to_belief().probs(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn invalid_sets() {
        assert!(ParticleSet::new(2, vec![]).is_err());
        assert!(ParticleSet::new(2, vec![Particle { state: 2, weight: 1.0 }]).is_err());
        assert!(ParticleSet::new(2, vec![Particle { state: 0, weight: 0.0 }]).is_err());
        assert!(ParticleSet::new(2, vec![Particle { state: 0, weight: -1.0 }]).is_err());
    }

    #[test]
    fn ess_values() {
        assert!((set(2, &[(0, 1.0); 5]).effective_sample_size() - 5.0).abs() < 1e-12);
        assert!((set(2, &[(0, 1.0), (1, 0.0)]).effective_sample_size() - 1.0).abs() < 1e-12);
        assert!((set(2, &[(0, 3.0), (1, 1.0)]).effective_sample_size() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn deterministic_filters() {
        let m = deterministic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = set(2, &[(0, 1.0)]);
        let sis = sis_step(&m, &p, 0, 1, 5, &mut rng).unwrap();
        assert!(sis.particles().iter().all(|q| q.state == 1 && q.weight == 1.0));
        let ei = ei_step(&m, &p, 0, 1, 5, &mut rng).unwrap();
        assert!(ei.particles().iter().all(|q| q.state == 1 && q.weight == 1.0));
        assert_eq!(
            sis_step(&m, &p, 0, 0, 5, &mut rng).unwrap_err(),
            FilterError::Depletion { action: 0, observation: 0 }
        );
        assert_eq!(
            ei_step(&m, &p, 0, 0, 5, &mut rng).unwrap_err(),
            FilterError::ImpossibleEvidence { action: 0, observation: 0 }
        );
        assert_eq!(sis_step(&m, &p, 0, 1, 0, &mut rng).unwrap_err(), FilterError::NoParticles);
    }

    #[test]
    fn reweight_by_likelihood() {
        let m = tiger();
        // Open actions have uniform observations: weights keep their ratios.
        let p = set(2, &[(0, 1.0), (1, 3.0)]);
        let r = reweight(&m, &p, 1, 0).unwrap();
        assert!((r.particles()[0].weight - 0.25).abs() < 1e-15);
        assert!((r.particles()[1].weight - 0.75).abs() < 1e-15);
        // Listening: likelihoods 0.85 and 0.15 on equal priors.
        let p = set(2, &[(0, 1.0), (1, 1.0)]);
        let r = reweight(&m, &p, 0, 1).unwrap();
        assert!((r.particles()[0].weight - 0.15).abs() < 1e-12);
        assert!((r.particles()[1].weight - 0.85).abs() < 1e-12);
        assert!((r.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_particle_reweight() {
        // Likelihoods 0.9 and 0.1 with equal priors.
        let m = Pomdp::new(
            2,
            1,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.9, 0.1, 0.1, 0.9],
            vec![0.0, 0.0],
            0.5,
        )
        .unwrap();
        let r = reweight(&m, &set(2, &[(0, 2.0), (1, 2.0)]), 0, 0).unwrap();
        assert!((r.particles()[0].weight - 0.9).abs() < 1e-12);
        assert!((r.particles()[1].weight - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sis_converges_on_tiger() {
        let m = tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let prior = set(2, &[(0, 1.0), (1, 1.0)]);
        let out = sis_step(&m, &prior, 0, 0, 100_000, &mut rng).unwrap();
        let exact = Belief::new(vec![0.85, 0.15]).unwrap();
        assert!(out.to_belief().tv_distance(&exact) < 0.01);
    }

    #[test]
    fn ei_weights_are_unit_and_reproducible() {
        let m = tiger();
        let prior = set(2, &[(0, 0.3), (1, 0.7), (0, 1.1)]);
        let run = |resampling| {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            ei_step_with(&m, &prior, 0, 1, 64, resampling, &mut rng).unwrap()
        };
        for r in [Resampling::Multinomial, Resampling::Systematic] {
            let a = run(r);
            assert!(a.particles().iter().all(|p| p.weight == 1.0));
            assert_eq!(a, run(r));
            let ess = a.effective_sample_size();
            assert!((1.0..=a.len() as f64).contains(&ess));
        }
    }

    #[test]
    fn systematic_resampling_tracks_exact_update() {
        let m = tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prior = ParticleSet::from_belief(&Belief::uniform(2));
        let out = ei_step_with(&m, &prior, 0, 0, 10_000, Resampling::Systematic, &mut rng).unwrap();
        let exact = m.belief_update(&Belief::uniform(2), 0, 0).unwrap();
        assert!(out.to_belief().tv_distance(&exact) < 0.005);
    }
}
