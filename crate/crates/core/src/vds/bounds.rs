//! Closed-form bounds. Everything here is a pure function of its inputs.

use super::VdsError;
use crate::numeric::ceil_count;
use crate::valuefn::{alpha_range, AlphaSet};

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), VdsError> {
    if ok {
        Ok(())
    } else {
        Err(VdsError::Domain(message()))
    }
}

fn check_common(range: f64, delta: f64) -> Result<(), VdsError> {
    check(range >= 0.0 && range.is_finite(), || {
        format!("range must be finite and non-negative, got {range}")
    })?;
    check(delta > 0.0 && delta <= 1.0, || {
        format!("delta must lie in (0, 1], got {delta}")
    })
}

/// One-sided Hoeffding error `sqrt(R^2 ln(1/delta) / (2n))`.
pub fn epsilon_bound(range: f64, delta: f64, n: u64) -> Result<f64, VdsError> {
    check_common(range, delta)?;
    check(n >= 1, || "at least one sample is required".into())?;
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// `ceil(R^2 ln(1/delta) / (2 eps^2))`.
pub fn sample_size(range: f64, epsilon: f64, delta: f64) -> Result<u64, VdsError> {
    check_common(range, delta)?;
    check(epsilon > 0.0 && epsilon.is_finite(), || {
        format!("epsilon must be positive, got {epsilon}")
    })?;
    Ok(ceil_count(
        range * range * (1.0 / delta).ln() / (2.0 * epsilon * epsilon),
    ))
}

/// Sample size that holds `epsilon` for every vector at once.
pub fn simultaneous_sample_size(set: &AlphaSet, epsilon: f64, delta: f64) -> Result<u64, VdsError> {
    let per_vector = delta / set.len() as f64;
    set.vectors().iter().try_fold(0, |acc, v| {
        Ok(acc.max(sample_size(alpha_range(v), epsilon, per_vector)?))
    })
}

/// `ceil((R^2 / (2 B eps^2)) ln(B n / delta))` for `n` vectors.
pub fn batch_size_formula(
    max_range: f64,
    epsilon: f64,
    batches: u64,
    num_vectors: usize,
    delta: f64,
) -> u64 {
    let b = batches as f64;
    ceil_count(
        max_range * max_range / (2.0 * b * epsilon * epsilon)
            * (b * num_vectors as f64 / delta).ln(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub id: usize,
    pub value: f64,
    pub range: f64,
}

/// Separation of the apparent best vector from its competitors, using
/// simultaneous bounds at `delta / len`. Returns `(tau, chosen id)`; a single
/// estimate gives `tau = -inf`.
pub fn posthoc_tau(estimates: &[Estimate], n: u64, delta: f64) -> Result<(f64, usize), VdsError> {
    check(!estimates.is_empty(), || "no estimates".into())?;
    let per_vector = delta / estimates.len() as f64;
    let eps = estimates
        .iter()
        .map(|e| epsilon_bound(e.range, per_vector, n))
        .collect::<Result<Vec<_>, _>>()?;
    let leader = leader(estimates.iter().map(|e| (e.id, e.value)));
    let lead = estimates.iter().position(|e| e.id == leader).expect("leader is listed");
    Ok((tau(estimates.iter().map(|e| e.value), &eps, lead), leader))
}

/// Index of the highest value, lowest id on ties.
pub(crate) fn leader(values: impl Iterator<Item = (usize, f64)>) -> usize {
    values
        .fold(None::<(usize, f64)>, |best, (id, v)| match best {
            Some((bid, bv)) if bv > v || (bv == v && bid < id) => Some((bid, bv)),
            _ => Some((id, v)),
        })
        .expect("non-empty")
        .0
}

pub(crate) fn tau(values: impl Iterator<Item = f64>, eps: &[f64], lead: usize) -> f64 {
    let values: Vec<f64> = values.collect();
    let rival = values
        .iter()
        .zip(eps)
        .enumerate()
        .filter(|(i, _)| *i != lead)
        .map(|(_, (v, e))| v + e)
        .fold(f64::NEG_INFINITY, f64::max);
    rival - (values[lead] - eps[lead])
}

/// Inputs shared by the stage-wise bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub delta: f64,
    /// Worst-case loss of arbitrary behavior.
    pub h: f64,
    pub beta: f64,
    /// Stage index.
    pub t: u32,
    /// Stage offset.
    pub k: u32,
}

/// Expected loss from approximating one stage `t`, exact elsewhere:
/// `beta^(t+1) (2 eps (1 - delta) + delta h)`.
pub fn one_stage_bound(inputs: &BoundInputs) -> f64 {
    let BoundInputs {
        epsilon,
        delta,
        h,
        beta,
        t,
        ..
    } = *inputs;
    beta.powi(t as i32 + 1) * (2.0 * epsilon * (1.0 - delta) + delta * h)
}

/// `beta^(t+1) (max(tau, 0) (1 - delta) + delta h)`.
pub fn posthoc_one_stage_bound(tau: f64, delta: f64, h: f64, beta: f64, t: u32) -> f64 {
    beta.powi(t as i32 + 1) * (tau.max(0.0) * (1.0 - delta) + delta * h)
}

/// `h beta delta / (1 - beta + beta delta)`: a mistake-driven loss bound when
/// every stage is monitored approximately.
pub fn multistage_bound(h: f64, beta: f64, delta: f64) -> f64 {
    h * beta * delta / (1.0 - beta + beta * delta)
}

/// `2 eps beta / (1 - beta) + 2 eps h beta delta / (1 - beta + beta delta)`.
///
/// A heuristic estimate, not a guarantee.
pub fn approx_multistage_bound(epsilon: f64, h: f64, beta: f64, delta: f64) -> f64 {
    2.0 * epsilon * beta / (1.0 - beta)
        + 2.0 * epsilon * h * beta * delta / (1.0 - beta + beta * delta)
}

/// `h beta delta / (1 - beta + beta delta) + beta^(t+1) 2 eps + beta^(t+k+1) h`
/// where `t` is the first stage with `tau > 0`.
pub fn posthoc_multistage_bound(h: f64, beta: f64, delta: f64, epsilon: f64, t: u32, k: u32) -> f64 {
    multistage_bound(h, beta, delta)
        + beta.powi(t as i32 + 1) * 2.0 * epsilon
        + beta.powi((t + k) as i32 + 1) * h
}
