use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vdmon::filter::{ei_step_with, sis_step, ParticleSet, Resampling};
use vdmon::{Belief, Pomdp};

fn random_model(rng: &mut ChaCha8Rng, n: usize) -> Pomdp {
    let na = 2;
    let nz = 3;
    let rows = |len: usize, count: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..count)
            .flat_map(|_| Belief::random(len, rng).probs().to_vec())
            .collect()
    };
    let transition = rows(n, na * n, rng);
    let observation = rows(nz, na * n, rng);
    let reward = vec![0.0; n * na];
    Pomdp::new(n, na, nz, transition, observation, reward, 0.9).unwrap()
}

/// Upper 0.1% points of the chi-square distribution, by degrees of freedom.
const CHI2_999: [f64; 6] = [0.0, 10.828, 13.816, 16.266, 18.467, 20.515];

fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let mut chi = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let expected = total as f64 * p;
            chi += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        } else {
            assert_eq!(c, 0, "particle on a zero-probability state");
        }
    }
    (chi, cells - 1)
}

#[test]
fn evidence_integration_draws_from_the_exact_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..6 {
        let n = 2 + case % 5;
        let model = random_model(&mut rng, n);
        let prior = ParticleSet::sample(&Belief::random(n, &mut rng), 25, &mut rng).unwrap();
        let a = rng.random_range(0..2);
        let o = rng.random_range(0..3);
        let exact = model.belief_update(&prior.to_belief(), a, o).unwrap();
        for resampling in [Resampling::Multinomial, Resampling::Systematic] {
            let mut counts = vec![0u64; n];
            for _ in 0..200 {
                let next = ei_step_with(&model, &prior, a, o, 5000, resampling, &mut rng).unwrap();
                for p in next.particles() {
                    counts[p.state] += 1;
                }
            }
            let (chi, df) = chi_square(&counts, exact.probs());
            assert!(chi <= CHI2_999[df], "case {case} {resampling:?}: chi2 {chi} on {df} df");
        }
    }
}

#[test]
fn sis_weights_converge_to_the_exact_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let model = random_model(&mut rng, 4);
    let prior = ParticleSet::sample(&Belief::random(4, &mut rng), 40, &mut rng).unwrap();
    let exact = model.belief_update(&prior.to_belief(), 1, 2).unwrap();
    let next = sis_step(&model, &prior, 1, 2, 400_000, &mut rng).unwrap();
    assert!(next.to_belief().tv_distance(&exact) < 5e-3);
}

proptest! {
    #[test]
    fn ei_output_stays_on_the_posterior_support(seed in any::<u64>(), n in 2usize..7, count in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, n);
        let prior = ParticleSet::sample(&Belief::random(n, &mut rng), 10, &mut rng).unwrap();
        let exact = model.belief_update(&prior.to_belief(), 0, 1).unwrap();
        let next = ei_step_with(&model, &prior, 0, 1, count, Resampling::Systematic, &mut rng).unwrap();
        prop_assert_eq!(next.len(), count);
        prop_assert!(next.particles().iter().all(|p| exact.probs()[p.state] > 0.0));
        let ess = next.effective_sample_size();
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= count as f64 + 1e-9);
        prop_assert!((next.to_belief().probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
