//! Seeded generator for the synthetic benchmark models.
//!
//! Probabilities are multiples of 1/1000 and rewards are integers, so the
//! written files are short and parse back to the same model.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{write_pomdp, Pomdp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_observations: usize,
    /// Number of possible successors of each state.
    pub successors: usize,
    /// Probability (in thousandths) that the observation matches the
    /// arrival state's signal, before jitter.
    pub accuracy: u32,
    pub discount: f64,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn synthetic8() -> Self {
        Self {
            num_states: 8,
            num_actions: 3,
            num_observations: 2,
            successors: 3,
            accuracy: 750,
            discount: 0.9,
            seed: 8,
        }
    }

    pub fn synthetic32() -> Self {
        Self {
            num_states: 32,
            num_actions: 3,
            num_observations: 2,
            successors: 3,
            accuracy: 750,
            discount: 0.9,
            seed: 32,
        }
    }
}

/// Splits 1000 into `parts` positive integer shares.
fn thousandths(rng: &mut ChaCha8Rng, parts: usize) -> Vec<u32> {
    let raw: Vec<u32> = (0..parts).map(|_| rng.random_range(1..=20)).collect();
    let total: u32 = raw.iter().sum();
    let mut shares: Vec<u32> = raw.iter().map(|r| (r * 1000 / total).max(1)).collect();
    let assigned: u32 = shares[..parts - 1].iter().sum();
    shares[parts - 1] = 1000 - assigned;
    shares
}

pub fn generate(params: &SyntheticParams) -> Pomdp {
    let SyntheticParams {
        num_states: n,
        num_actions: na,
        num_observations: nz,
        ..
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let successors = params.successors.clamp(1, n);
    let mut transition = vec![0.0; na * n * n];
    for a in 0..na {
        for s in 0..n {
            let support = sample(&mut rng, n, successors);
            let shares = thousandths(&mut rng, successors);
            for (next, share) in support.iter().zip(shares) {
                transition[(a * n + s) * n + next] = f64::from(share) / 1000.0;
            }
        }
    }
    let mut observation = vec![0.0; na * n * nz];
    for a in 0..na {
        for next in 0..n {
            let row = &mut observation[(a * n + next) * nz..(a * n + next + 1) * nz];
            if nz == 1 {
                row[0] = 1.0;
                continue;
            }
            let jitter = rng.random_range(0..=100);
            let hit = (params.accuracy + jitter).min(1000 - (nz as u32 - 1));
            let rest = 1000 - hit;
            let signal = (next + a) % nz;
            let mut others = (0..nz).filter(|&o| o != signal).peekable();
            let per = rest / (nz as u32 - 1);
            let mut given = 0;
            while let Some(o) = others.next() {
                let share = if others.peek().is_none() { rest - given } else { per };
                given += share;
                row[o] = f64::from(share) / 1000.0;
            }
            row[signal] = f64::from(hit) / 1000.0;
        }
    }
    let reward: Vec<f64> = (0..n * na)
        .map(|_| f64::from(rng.random_range(-10i32..=10)))
        .collect();
    Pomdp::new(n, na, nz, transition, observation, reward, params.discount)
        .expect("generated tables are stochastic")
}

/// Model text as committed under `fixtures/`.
pub fn generate_text(params: &SyntheticParams) -> String {
    format!(
        "# Synthetic model: {} states, {} actions, {} observations, seed {}.\n\n{}",
        params.num_states,
        params.num_actions,
        params.num_observations,
        params.seed,
        write_pomdp(&generate(params))
    )
}
