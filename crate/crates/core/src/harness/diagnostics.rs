//! Bound-vs-loss reporting and empirical audits.

use rand::Rng;

use crate::filter::{ei_step, sis_step, ParticleSet};
use crate::model::{sample_categorical, Belief, Pomdp, IMPOSSIBLE_EVIDENCE};
use crate::valuefn::{alpha_range, AlphaSet};
use crate::vds::{epsilon_bound, VdsError};

/// Largest per-vector Hoeffding error for `n` samples when `delta` is split
/// evenly over the set.
pub fn fixed_epsilon(set: &AlphaSet, n: usize, delta: f64) -> Result<f64, VdsError> {
    let per_vector = delta / set.len() as f64;
    set.vectors().iter().try_fold(0.0, |acc: f64, v| {
        Ok(acc.max(epsilon_bound(alpha_range(v), per_vector, n as u64)?))
    })
}

/// `2 max_a epsilon_bound(R_a, delta / |set|, n)`.
pub fn report_2epsilon(set: &AlphaSet, n: usize, delta: f64) -> Result<f64, VdsError> {
    Ok(2.0 * fixed_epsilon(set, n, delta)?)
}

/// Actions used while rolling belief pairs forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutActions {
    Policy,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Fact1Report {
    pub pairs: usize,
    pub steps: usize,
    /// Pairs whose maximizing vectors diverged under policy actions.
    pub policy_violations: usize,
    /// Same under uniformly random actions.
    pub random_violations: usize,
    /// Pairs abandoned because no shared observation had positive probability
    /// (counted per rollout kind).
    pub stalled: usize,
    /// Requested pairs for which no agreeing partner belief was found.
    pub skipped: usize,
}

fn mix(a: &Belief, b: &Belief, lambda: f64) -> Belief {
    let probs = a
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect();
    Belief::from_weights(probs).expect("mixture of beliefs")
}

/// Rolls `b` and `b~` forward `steps` times with identical actions and
/// observations. Returns `Some(true)` if `ma` diverged, `None` if the pair
/// stalled on an observation that is impossible under one of them.
pub fn fact1_rollout<R: Rng + ?Sized>(
    model: &Pomdp,
    set: &AlphaSet,
    b: &Belief,
    b_approx: &Belief,
    steps: usize,
    actions: RolloutActions,
    rng: &mut R,
) -> Option<bool> {
    let mut b = b.clone();
    let mut bt = b_approx.clone();
    if set.value_and_ma(&b).1 != set.value_and_ma(&bt).1 {
        return Some(true);
    }
    for _ in 0..steps {
        let a = match actions {
            RolloutActions::Policy => set.action(&b),
            RolloutActions::Random => rng.random_range(0..model.num_actions()),
        };
        let weights: Vec<f64> = (0..model.num_observations())
            .map(|o| {
                let p = model.obs_probability(&b, a, o);
                let q = model.obs_probability(&bt, a, o);
                if p > IMPOSSIBLE_EVIDENCE && q > IMPOSSIBLE_EVIDENCE {
                    p
                } else {
                    0.0
                }
            })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            return None;
        }
        let o = sample_categorical(&weights, rng);
        b = model.belief_update(&b, a, o).ok()?;
        bt = model.belief_update(&bt, a, o).ok()?;
        if set.value_and_ma(&b).1 != set.value_and_ma(&bt).1 {
            return Some(true);
        }
    }
    Some(false)
}

/// Draws random pairs with `ma(b) = ma(b~)` and counts pairs whose maximizing
/// vectors diverge within `steps` steps, separately for policy and random
/// actions. Partners are drawn on the segment towards a random belief.
pub fn fact1_check<R: Rng + ?Sized>(
    model: &Pomdp,
    set: &AlphaSet,
    samples: usize,
    steps: usize,
    rng: &mut R,
) -> Fact1Report {
    let n = model.num_states();
    let mut report = Fact1Report {
        pairs: 0,
        steps,
        ..Fact1Report::default()
    };
    for _ in 0..samples {
        let b = Belief::random(n, rng);
        let target = set.value_and_ma(&b).1;
        let partner = (0..1000).find_map(|_| {
            let other = Belief::random(n, rng);
            let bt = mix(&b, &other, rng.random::<f64>());
            (set.value_and_ma(&bt).1 == target).then_some(bt)
        });
        let Some(bt) = partner else {
            report.skipped += 1;
            continue;
        };
        report.pairs += 1;
        for (actions, count) in [
            (RolloutActions::Policy, &mut report.policy_violations),
            (RolloutActions::Random, &mut report.random_violations),
        ] {
            match fact1_rollout(model, set, &b, &bt, steps, actions, rng) {
                Some(true) => *count += 1,
                Some(false) => {}
                None => report.stalled += 1,
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDiagnostics {
    pub particles: usize,
    pub runs: usize,
    pub steps: usize,
    /// Mean total-variation distance to the exact belief after the last step.
    pub sis_tv: f64,
    pub ei_tv: f64,
    /// Mean effective sample size of the weighted SIS set.
    pub sis_ess: f64,
    pub sis_depletions: usize,
    pub ei_depletions: usize,
}

/// Tracks random trajectories with both fixed-size filters next to the exact
/// filter. A depleted filter restarts from the exact belief.
pub fn filter_diagnostics<R: Rng + ?Sized>(
    model: &Pomdp,
    particles: usize,
    runs: usize,
    steps: usize,
    rng: &mut R,
) -> Result<FilterDiagnostics, crate::filter::FilterError> {
    let n = model.num_states();
    let mut out = FilterDiagnostics {
        particles,
        runs,
        steps,
        sis_tv: 0.0,
        ei_tv: 0.0,
        sis_ess: 0.0,
        sis_depletions: 0,
        ei_depletions: 0,
    };
    let mut ess_count = 0usize;
    for _ in 0..runs {
        let mut exact = Belief::random(n, rng);
        let mut state = exact.sample_state(rng);
        let mut sis = ParticleSet::sample(&exact, particles, rng)?;
        let mut ei = sis.clone();
        for _ in 0..steps {
            let a = rng.random_range(0..model.num_actions());
            let (next, o, _) = model.simulate_step(state, a, rng);
            state = next;
            exact = model.belief_update(&exact, a, o)?;
            sis = match sis_step(model, &sis, a, o, particles, rng) {
                Ok(p) => {
                    out.sis_ess += p.effective_sample_size();
                    ess_count += 1;
                    p
                }
                Err(_) => {
                    out.sis_depletions += 1;
                    ParticleSet::sample(&exact, particles, rng)?
                }
            };
            ei = match ei_step(model, &ei, a, o, particles, rng) {
                Ok(p) => p,
                Err(_) => {
                    out.ei_depletions += 1;
                    ParticleSet::sample(&exact, particles, rng)?
                }
            };
        }
        out.sis_tv += sis.to_belief().tv_distance(&exact);
        out.ei_tv += ei.to_belief().tv_distance(&exact);
    }
    if runs > 0 {
        out.sis_tv /= runs as f64;
        out.ei_tv /= runs as f64;
    }
    if ess_count > 0 {
        out.sis_ess /= ess_count as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::valuefn::{Horizon, Objective, Prune, Solver};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_epsilon_examples() {
        let single = AlphaSet::new(vec![(vec![0.0, 2.0], 0)], Horizon::Stationary, Objective::Maximize)
            .unwrap();
        assert_eq!(report_2epsilon(&single, 10, 1.0).unwrap(), 0.0);
        let v = report_2epsilon(&single, 1, (-2.0f64).exp()).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_epsilon_uses_the_widest_vector() {
        let set = AlphaSet::new(
            vec![(vec![0.0, 1.0], 0), (vec![0.0, 3.0], 1)],
            Horizon::Stationary,
            Objective::Maximize,
        )
        .unwrap();
        let expected = 2.0 * epsilon_bound(3.0, 0.05, 50).unwrap();
        assert_eq!(report_2epsilon(&set, 50, 0.1).unwrap(), expected);
    }

    #[test]
    fn identical_pairs_never_diverge() {
        let model = fixtures::tiger();
        let set = Solver::new(Objective::Maximize, Prune::Lp).solve(&model, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let b = Belief::random(2, &mut rng);
            for actions in [RolloutActions::Policy, RolloutActions::Random] {
                assert_eq!(
                    fact1_rollout(&model, &set, &b, &b, 3, actions, &mut rng),
                    Some(false)
                );
            }
        }
    }

    #[test]
    fn singleton_set_has_no_violations() {
        let model = fixtures::tiger();
        let set = AlphaSet::new(vec![(vec![1.0, 2.0], 0)], Horizon::Stationary, Objective::Maximize)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = fact1_check(&model, &set, 100, 3, &mut rng);
        assert_eq!(r.pairs, 100);
        assert_eq!(r.policy_violations + r.random_violations, 0);
    }

    #[test]
    fn filter_diagnostics_on_tiger() {
        let model = fixtures::tiger();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = filter_diagnostics(&model, 200, 40, 3, &mut rng).unwrap();
        assert!(d.ei_tv < 0.1, "{d:?}");
        assert!(d.sis_tv < 0.15, "{d:?}");
        assert!(d.sis_ess > 0.0 && d.sis_ess <= 200.0);
    }
}
