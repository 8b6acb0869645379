//! Exact finite-horizon value iteration by enumeration (Monahan style): every
//! backup forms the full cross-sum of projected vectors, then prunes.
//!
//! Minimizing solves run the same code on the reward-negated model and negate
//! the result.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lp::{witness, DOMINATION_TOLERANCE};
use super::{AlphaSet, Horizon, Objective, Prune, ValueFnError};
use crate::model::{Belief, Pomdp};

/// Default limit on the number of vectors formed by one backup's cross-sum.
pub const DEFAULT_CROSS_SUM_CAP: usize = 1_000_000;

type Candidate = (Vec<f64>, usize);

#[derive(Debug, Clone)]
pub struct Solver {
    pub objective: Objective,
    pub prune: Prune,
    /// Maximum pre-pruning cross-sum size at any backup.
    pub cap: usize,
    /// Stationary solves stop once `V` moves less than this on the check grid.
    pub tolerance: f64,
    pub max_backups: usize,
    /// Number of random beliefs (besides corners and the centroid) in the
    /// convergence grid.
    pub grid_size: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            objective: Objective::Maximize,
            prune: Prune::Lp,
            cap: DEFAULT_CROSS_SUM_CAP,
            tolerance: 1e-4,
            max_backups: 5_000,
            grid_size: 256,
        }
    }
}

/// Solves `model` to `horizon` stages with the default cap.
pub fn solve(
    model: &Pomdp,
    horizon: usize,
    objective: Objective,
    prune: Prune,
) -> Result<AlphaSet, ValueFnError> {
    Solver {
        objective,
        prune,
        ..Solver::default()
    }
    .solve(model, horizon)
}

impl Solver {
    pub fn new(objective: Objective, prune: Prune) -> Self {
        Self {
            objective,
            prune,
            ..Self::default()
        }
    }

    fn working_model(&self, model: &Pomdp) -> Pomdp {
        match self.objective {
            Objective::Maximize => model.clone(),
            Objective::Minimize => model.negated_rewards(),
        }
    }

    fn finish(&self, mut vectors: Vec<Candidate>, horizon: Horizon) -> Result<AlphaSet, ValueFnError> {
        if self.objective == Objective::Minimize {
            for (v, _) in &mut vectors {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        AlphaSet::new(vectors, horizon, self.objective)
    }

    pub fn solve(&self, model: &Pomdp, horizon: usize) -> Result<AlphaSet, ValueFnError> {
        if horizon == 0 {
            return Err(ValueFnError::Horizon);
        }
        let work = self.working_model(model);
        let mut current = self.initial(&work)?;
        for h in 2..=horizon {
            current = self.backup(&work, &current, h)?;
        }
        self.finish(current, Horizon::Finite(horizon))
    }

    /// Iterates backups until the value function stops moving on a fixed
    /// belief grid, then tags the result stationary.
    pub fn solve_stationary(&self, model: &Pomdp) -> Result<AlphaSet, ValueFnError> {
        let work = self.working_model(model);
        let grid = convergence_grid(work.num_states(), self.grid_size);
        let values = |set: &[Candidate]| -> Vec<f64> {
            grid.iter()
                .map(|b| {
                    set.iter()
                        .map(|(v, _)| b.dot(v))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        };
        let mut current = self.initial(&work)?;
        let mut previous = values(&current);
        for h in 2..=self.max_backups {
            current = self.backup(&work, &current, h)?;
            let next = values(&current);
            let change = next
                .iter()
                .zip(&previous)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < self.tolerance {
                return self.finish(current, Horizon::Stationary);
            }
            previous = next;
        }
        Err(ValueFnError::NotConverged(self.max_backups))
    }

    fn initial(&self, model: &Pomdp) -> Result<Vec<Candidate>, ValueFnError> {
        let candidates = (0..model.num_actions())
            .map(|a| (model.reward_vector(a), a))
            .collect();
        self.prune_candidates(dedup(candidates))
    }

    fn backup(
        &self,
        model: &Pomdp,
        previous: &[Candidate],
        horizon: usize,
    ) -> Result<Vec<Candidate>, ValueFnError> {
        let n = model.num_states();
        let beta = model.discount();
        let mut projections: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(model.num_actions());
        let mut total: usize = 0;
        for a in 0..model.num_actions() {
            let mut per_obs = Vec::with_capacity(model.num_observations());
            let mut size: usize = 1;
            for o in 0..model.num_observations() {
                let projected: Vec<Candidate> = previous
                    .iter()
                    .map(|(alpha, _)| {
                        let g = (0..n)
                            .map(|s| {
                                beta * model
                                    .transition_row(a, s)
                                    .iter()
                                    .enumerate()
                                    .map(|(next, &t)| t * model.observation(a, next, o) * alpha[next])
                                    .sum::<f64>()
                            })
                            .collect();
                        (g, 0)
                    })
                    .collect();
                let projected = self.prune_candidates(dedup(projected))?;
                size = size.saturating_mul(projected.len());
                per_obs.push(projected.into_iter().map(|(g, _)| g).collect());
            }
            total = total.saturating_add(size);
            projections.push(per_obs);
        }
        if total > self.cap {
            return Err(ValueFnError::CapExceeded {
                size: total,
                horizon,
                cap: self.cap,
            });
        }
        let mut candidates: Vec<Candidate> = Vec::new();
        for (a, per_obs) in projections.iter().enumerate() {
            let mut partial = vec![model.reward_vector(a)];
            for proj in per_obs {
                let mut next = Vec::with_capacity(partial.len() * proj.len());
                for base in &partial {
                    for g in proj {
                        next.push(base.iter().zip(g).map(|(x, y)| x + y).collect::<Vec<f64>>());
                    }
                }
                partial = next;
            }
            candidates.extend(partial.into_iter().map(|v| (v, a)));
        }
        self.prune_candidates(dedup(candidates))
    }

    fn prune_candidates(&self, candidates: Vec<Candidate>) -> Result<Vec<Candidate>, ValueFnError> {
        match self.prune {
            Prune::None => Ok(candidates),
            Prune::Pointwise => Ok(pointwise_prune(candidates)),
            Prune::Lp => lp_prune(pointwise_prune(candidates)),
        }
    }
}

fn key(values: &[f64]) -> Vec<u64> {
    values
        .iter()
        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

/// Drops exact repeats of `(values, action)`, keeping first occurrences.
fn dedup(candidates: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen: HashSet<(Vec<u64>, usize)> = HashSet::with_capacity(candidates.len());
    candidates
        .into_iter()
        .filter(|(v, a)| seen.insert((key(v), *a)))
        .collect()
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Removes every vector that some other vector matches or beats in every
/// state. Among equal vectors the earliest survives. Input order is kept.
fn pointwise_prune(candidates: Vec<Candidate>) -> Vec<Candidate> {
    let sums: Vec<f64> = candidates.iter().map(|(v, _)| v.iter().sum()).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| sums[j].total_cmp(&sums[i]).then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept
            .iter()
            .any(|&k| weakly_dominates(&candidates[k].0, &candidates[i].0))
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut keep = vec![false; candidates.len()];
    kept.into_iter().for_each(|k| keep[k] = true);
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Index of the best vector at `belief`, ties broken lexicographically on the
/// values and then by lowest index.
fn best_at(belief: &[f64], pool: &[usize], candidates: &[Candidate]) -> usize {
    let score = |i: usize| -> f64 { belief.iter().zip(&candidates[i].0).map(|(b, v)| b * v).sum() };
    let mut best = pool[0];
    let mut best_score = score(best);
    for &i in &pool[1..] {
        let s = score(i);
        let tie = (s - best_score).abs() <= 1e-12 * (1.0 + best_score.abs());
        let better = if tie {
            candidates[i]
                .0
                .iter()
                .zip(&candidates[best].0)
                .find(|(x, y)| x != y)
                .is_some_and(|(x, y)| x > y)
        } else {
            s > best_score
        };
        if better {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Witness-LP filtering: grows a set of vectors that are best at some
/// witness belief, testing each remaining candidate only against that set,
/// then drops any survivor whose own region is thinner than the tolerance.
fn lp_prune(candidates: Vec<Candidate>) -> Result<Vec<Candidate>, ValueFnError> {
    if candidates.len() <= 1 {
        return Ok(candidates);
    }
    let n = candidates[0].0.len();
    let mut pool: Vec<usize> = (0..candidates.len()).collect();
    let mut winners: Vec<usize> = Vec::new();
    let take = |pool: &mut Vec<usize>, winners: &mut Vec<usize>, belief: &[f64]| {
        let w = best_at(belief, pool, &candidates);
        pool.retain(|&i| i != w);
        winners.push(w);
    };
    for s in 0..n {
        if pool.is_empty() {
            break;
        }
        let corner = Belief::point(n, s);
        take(&mut pool, &mut winners, corner.probs());
    }
    while let Some(&first) = pool.first() {
        let refs: Vec<&[f64]> = winners.iter().map(|&w| candidates[w].0.as_slice()).collect();
        let (margin, belief) = witness(&candidates[first].0, &refs)?;
        if margin <= DOMINATION_TOLERANCE {
            pool.remove(0);
        } else {
            take(&mut pool, &mut winners, &belief);
        }
    }
    winners.sort_unstable();
    // Later vectors go first so that among near-coincident vectors the
    // lowest index survives.
    let mut i = winners.len();
    while i > 0 {
        i -= 1;
        let refs: Vec<&[f64]> = winners
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &w)| candidates[w].0.as_slice())
            .collect();
        if refs.is_empty() {
            break;
        }
        let (margin, _) = witness(&candidates[winners[i]].0, &refs)?;
        if margin <= DOMINATION_TOLERANCE {
            winners.remove(i);
        }
    }
    let mut keep = vec![false; candidates.len()];
    winners.into_iter().for_each(|w| keep[w] = true);
    Ok(candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect())
}

fn convergence_grid(num_states: usize, random: usize) -> Vec<Belief> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_9a1d);
    let mut grid: Vec<Belief> = (0..num_states)
        .map(|s| Belief::point(num_states, s))
        .collect();
    grid.push(Belief::uniform(num_states));
    grid.extend((0..random).map(|_| Belief::random(num_states, &mut rng)));
    grid
}
