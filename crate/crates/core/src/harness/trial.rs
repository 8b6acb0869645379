//! One simulated episode under one monitoring policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, ExperimentConfig, HarnessError, Policy};
use crate::filter::{ei_step_with, sis_step, FilterError, ParticleSet};
use crate::model::{Belief, Pomdp};
use crate::valuefn::AlphaSet;
use crate::vds::{dynamic_select, select_from_belief, VdsError};

/// Models up to this size recover from depletion with an exact update.
pub const EXACT_RECOVERY_LIMIT: usize = 4096;

/// The three per-trial random streams. Every grid cell derives them from the
/// same `(seed, trial)`, so cells see the same initial beliefs, hidden states
/// and environment noise.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    /// Initial belief and hidden initial state.
    pub init: ChaCha8Rng,
    /// Environment transitions and observations.
    pub env: ChaCha8Rng,
    /// Everything the agent samples.
    pub agent: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        let stream = |purpose: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial * 4 + purpose);
            rng
        };
        Self {
            init: stream(0),
            env: stream(1),
            agent: stream(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub action: usize,
    pub observation: usize,
    pub reward: f64,
    /// Samples the agent drew to choose this stage's action.
    pub samples: u64,
    /// Batches used by the dynamic selector (0 for other policies).
    pub batches: u64,
    /// Tau reported by the dynamic selector.
    pub tau: Option<f64>,
    /// Largest Hoeffding precision of a fixed-size particle belief.
    pub epsilon: Option<f64>,
    /// Whether the particle belief had to be rebuilt at this stage.
    pub depleted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub initial_belief: Belief,
    pub initial_state: usize,
    /// `V*(b0)` under the monitoring set.
    pub optimal_value: f64,
    /// `sum_t beta^t r_t` over the simulated stages.
    pub discounted_return: f64,
    /// `beta^T V*(b_T)` for the exact final belief.
    pub terminal_value: f64,
    /// `V*(b0) - (discounted_return + terminal_value)`.
    pub loss: f64,
    pub stages: Vec<StageLog>,
}

impl TrialRecord {
    pub fn samples_total(&self) -> u64 {
        self.stages.iter().map(|s| s.samples).sum()
    }

    pub fn batches_total(&self) -> u64 {
        self.stages.iter().map(|s| s.batches).sum()
    }

    /// Mean batches over stages that used the selector.
    pub fn batches_mean(&self) -> f64 {
        let used: Vec<u64> = self
            .stages
            .iter()
            .filter(|s| s.batches > 0)
            .map(|s| s.batches)
            .collect();
        if used.is_empty() {
            0.0
        } else {
            used.iter().sum::<u64>() as f64 / used.len() as f64
        }
    }

    pub fn depletions(&self) -> u64 {
        self.stages.iter().filter(|s| s.depleted).count() as u64
    }
}

/// Particle belief after an impossible-evidence failure: the exact update of
/// the old particle belief, else the exact update of the uniform belief, else
/// uniform.
pub fn recover_belief(model: &Pomdp, particles: &ParticleSet, action: usize, obs: usize) -> Belief {
    let n = model.num_states();
    if n <= EXACT_RECOVERY_LIMIT {
        if let Ok(b) = model.belief_update(&particles.to_belief(), action, obs) {
            return b;
        }
        if let Ok(b) = model.belief_update(&Belief::uniform(n), action, obs) {
            return b;
        }
    }
    Belief::uniform(n)
}

struct Decision {
    action: usize,
    samples: u64,
    batches: u64,
    tau: Option<f64>,
    epsilon: Option<f64>,
    depleted: bool,
}

impl Decision {
    fn plain(action: usize) -> Self {
        Self {
            action,
            samples: 0,
            batches: 0,
            tau: None,
            epsilon: None,
            depleted: false,
        }
    }
}

struct Agent<'a> {
    model: &'a Pomdp,
    set: &'a AlphaSet,
    worst: Option<&'a AlphaSet>,
    config: &'a ExperimentConfig,
    cell: &'a Cell,
    particles: Option<ParticleSet>,
    fixed_random: Option<Belief>,
    epsilon: Option<f64>,
}

impl Agent<'_> {
    fn fixed_step<R: Rng + ?Sized>(
        &self,
        prev: &ParticleSet,
        action: usize,
        obs: usize,
        rng: &mut R,
    ) -> Result<ParticleSet, FilterError> {
        let n = self.cell.particles;
        match self.cell.policy {
            Policy::PfSis => sis_step(self.model, prev, action, obs, n, rng),
            _ => ei_step_with(self.model, prev, action, obs, n, self.config.resampling, rng),
        }
    }

    fn decide<R: Rng + ?Sized>(
        &mut self,
        stage: usize,
        exact: &Belief,
        last: Option<(usize, usize)>,
        rng: &mut R,
    ) -> Result<Decision, HarnessError> {
        let approximate = !self.config.single_stage || stage == 0;
        let policy = self.cell.policy;
        match policy {
            Policy::Exact => Ok(Decision::plain(self.set.action(exact))),
            Policy::Worst => {
                let worst = self
                    .worst
                    .ok_or_else(|| HarnessError::Invalid("worst policy needs a minimizing set".into()))?;
                Ok(Decision::plain(worst.action(exact)))
            }
            Policy::Random => {
                let b = match &self.fixed_random {
                    Some(b) => b.clone(),
                    None => Belief::random(self.model.num_states(), rng),
                };
                Ok(Decision::plain(self.set.action(&b)))
            }
            _ if !approximate => Ok(Decision::plain(self.set.action(exact))),
            Policy::PfSis | Policy::PfEi => {
                let n = self.cell.particles;
                let mut depleted = false;
                let next = match (self.particles.take(), last) {
                    (Some(prev), Some((a, o))) => match self.fixed_step(&prev, a, o, rng) {
                        Ok(p) => p,
                        Err(FilterError::Depletion { .. } | FilterError::ImpossibleEvidence { .. }) => {
                            depleted = true;
                            ParticleSet::sample(&recover_belief(self.model, &prev, a, o), n, rng)?
                        }
                        Err(e) => return Err(e.into()),
                    },
                    _ => ParticleSet::sample(exact, n, rng)?,
                };
                let action = self.set.action(&next.to_belief());
                self.particles = Some(next);
                Ok(Decision {
                    action,
                    samples: n as u64,
                    batches: 0,
                    tau: None,
                    epsilon: self.epsilon,
                    depleted,
                })
            }
            Policy::PfDynamic => {
                let plan = self.config.plan(self.cell.batches);
                let mut depleted = false;
                let (report, next) = match (self.particles.take(), last) {
                    (Some(prev), Some((a, o))) => {
                        match dynamic_select(self.model, &prev, a, o, self.set, &plan, rng) {
                            Ok(r) => r,
                            Err(VdsError::Filter(
                                FilterError::Depletion { .. } | FilterError::ImpossibleEvidence { .. },
                            )) => {
                                depleted = true;
                                let b = recover_belief(self.model, &prev, a, o);
                                select_from_belief(&b, self.set, &plan, rng)?
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                    _ => select_from_belief(exact, self.set, &plan, rng)?,
                };
                let action = self.set.get(report.chosen).action;
                self.particles = Some(next);
                Ok(Decision {
                    action,
                    samples: report.samples_used,
                    batches: report.batches_used,
                    tau: Some(report.tau),
                    epsilon: None,
                    depleted,
                })
            }
        }
    }
}

/// Runs one episode. `b0` is drawn from `streams.init`, the environment from
/// `streams.env`, and all agent randomness from `streams.agent`.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    model: &Pomdp,
    set: &AlphaSet,
    worst: Option<&AlphaSet>,
    config: &ExperimentConfig,
    cell: &Cell,
    trial: u64,
    streams: &mut TrialStreams,
) -> Result<TrialRecord, HarnessError> {
    let n = model.num_states();
    let beta = model.discount();
    let b0 = Belief::random(n, &mut streams.init);
    let s0 = b0.sample_state(&mut streams.init);
    let optimal = set.value(&b0);
    let fixed_random = (config.random_fixed && cell.policy == Policy::Random)
        .then(|| Belief::random(n, &mut streams.agent));
    let epsilon = match cell.policy {
        Policy::PfSis | Policy::PfEi => Some(super::fixed_epsilon(set, cell.particles, config.delta)?),
        _ => None,
    };
    let mut agent = Agent {
        model,
        set,
        worst,
        config,
        cell,
        particles: None,
        fixed_random,
        epsilon,
    };
    let mut exact = b0.clone();
    let mut state = s0;
    let mut discounted = Vec::with_capacity(config.stages);
    let mut weight = 1.0;
    let mut last = None;
    let mut stages = Vec::with_capacity(config.stages);
    for t in 0..config.stages {
        let d = agent.decide(t, &exact, last, &mut streams.agent)?;
        let (next, obs, reward) = model.simulate_step(state, d.action, &mut streams.env);
        discounted.push(weight * reward);
        weight *= beta;
        exact = model.belief_update(&exact, d.action, obs)?;
        state = next;
        last = Some((d.action, obs));
        stages.push(StageLog {
            action: d.action,
            observation: obs,
            reward,
            samples: d.samples,
            batches: d.batches,
            tau: d.tau,
            epsilon: d.epsilon,
            depleted: d.depleted,
        });
    }
    let discounted_return = crate::numeric::compensated_sum(discounted);
    let terminal_value = weight * set.value(&exact);
    Ok(TrialRecord {
        trial,
        initial_belief: b0,
        initial_state: s0,
        optimal_value: optimal,
        discounted_return,
        terminal_value,
        loss: optimal - (discounted_return + terminal_value),
        stages,
    })
}
