//! Batch-sequential selection of the maximizing alpha-vector.
//!
//! Samples are drawn in batches and pooled. After batch `j` every vector gets
//! an estimate `V_a[j]` (mean of `alpha(s)` over all pooled samples) and a
//! precision `eps_a[j] = epsilon_bound(R_a, delta_j / |set|, n_j)`. The look
//! stops once `tau_j <= stop_threshold` or the batch limit is reached.

use rand::Rng;

use super::bounds::{epsilon_bound, leader, tau};
use super::{SamplingPlan, VdsError};
use crate::filter::{EvidenceSampler, ParticleSet};
use crate::model::{Belief, Pomdp};
use crate::valuefn::{alpha_range, AlphaSet, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStatus {
    /// Stopped because `tau` reached the plan's threshold.
    Separated,
    /// Ran out of looks first.
    Unseparated,
}

/// State after one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Look {
    /// 1-based look index `j`.
    pub index: u64,
    pub batch_size: u64,
    /// Pooled sample count `n_j`.
    pub samples: u64,
    pub delta: f64,
    pub leader: usize,
    pub tau: f64,
    pub estimates: Vec<f64>,
    pub precisions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorEstimate {
    pub id: usize,
    pub estimate: f64,
    pub precision: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub chosen: usize,
    /// Minimum `tau_j` over looks whose leader is the final choice.
    pub tau: f64,
    pub batches_used: u64,
    pub samples_used: u64,
    pub confidence_spent: f64,
    pub per_vector: Vec<VectorEstimate>,
    pub looks: Vec<Look>,
    pub status: SelectionStatus,
}

impl SelectionReport {
    pub fn separated(&self) -> bool {
        self.status == SelectionStatus::Separated
    }
}

fn run<R, F>(
    set: &AlphaSet,
    plan: &SamplingPlan,
    rng: &mut R,
    mut draw: F,
) -> Result<(SelectionReport, Vec<usize>), VdsError>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<usize, VdsError>,
{
    plan.validate()?;
    if set.objective() != Objective::Maximize {
        return Err(VdsError::Objective);
    }
    let per_batch = plan.batch_samples(set);
    let ranges: Vec<f64> = set.vectors().iter().map(alpha_range).collect();
    let mut counts = vec![0u64; set.num_states()];
    let mut samples: Vec<usize> = Vec::new();
    let mut looks: Vec<Look> = Vec::new();
    let mut spent = 0.0;
    let mut status = SelectionStatus::Unseparated;
    for j in 1..=plan.look_cap() {
        for _ in 0..per_batch {
            let s = draw(rng)?;
            counts[s] += 1;
            samples.push(s);
        }
        let n = samples.len() as u64;
        let delta = plan.look_delta(j);
        spent += delta;
        let estimates: Vec<f64> = set
            .vectors()
            .iter()
            .map(|v| {
                counts
                    .iter()
                    .zip(&v.values)
                    .map(|(&c, &a)| c as f64 * a)
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let precisions = ranges
            .iter()
            .map(|&r| epsilon_bound(r, delta / set.len() as f64, n))
            .collect::<Result<Vec<_>, _>>()?;
        let lead = leader(estimates.iter().copied().enumerate());
        let t = tau(estimates.iter().copied(), &precisions, lead);
        looks.push(Look {
            index: j,
            batch_size: per_batch,
            samples: n,
            delta,
            leader: lead,
            tau: t,
            estimates,
            precisions,
        });
        if t <= plan.stop_threshold {
            status = SelectionStatus::Separated;
            break;
        }
    }
    let last = looks.last().expect("at least one look");
    let chosen = last.leader;
    let n = last.samples;
    let per_vector = (0..set.len())
        .map(|id| VectorEstimate {
            id,
            estimate: last.estimates[id],
            precision: last.precisions[id],
            count: n,
        })
        .collect();
    let tau = looks
        .iter()
        .filter(|l| l.leader == chosen)
        .map(|l| l.tau)
        .fold(f64::INFINITY, f64::min);
    let report = SelectionReport {
        chosen,
        tau,
        batches_used: looks.len() as u64,
        samples_used: n,
        confidence_spent: spent,
        per_vector,
        looks,
        status,
    };
    Ok((report, samples))
}

/// Selects `ma` for `T(b~, a, o)` by sampling successors with evidence
/// integration. The pooled samples are returned as the next particle set.
pub fn dynamic_select<R: Rng + ?Sized>(
    model: &Pomdp,
    particles: &ParticleSet,
    action: usize,
    obs: usize,
    set: &AlphaSet,
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<(SelectionReport, ParticleSet), VdsError> {
    plan.validate()?;
    let mut sampler = EvidenceSampler::new(model, particles, action, obs)?;
    let (report, samples) = run(set, plan, rng, |r| Ok(sampler.draw(r)?))?;
    let next = ParticleSet::equally_weighted(model.num_states(), samples)?;
    Ok((report, next))
}

/// Same selector with samples drawn directly from a known belief.
pub fn select_from_belief<R: Rng + ?Sized>(
    belief: &Belief,
    set: &AlphaSet,
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<(SelectionReport, ParticleSet), VdsError> {
    let (report, samples) = run(set, plan, rng, |r| Ok(belief.sample_state(r)))?;
    let next = ParticleSet::equally_weighted(belief.len(), samples)?;
    Ok((report, next))
}
