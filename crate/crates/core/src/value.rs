//! Particle weights, the soft-value estimate and cost statistics.
//!
//! Every quantity is built from the per-particle log-scores
//! `sᵢ = -C̃(θⁱ)/λ + log p(θⁱ)`: the weights are their softmax and the value
//! estimate is `V̂ = -λ logsumexp(s)`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iter: usize,
    pub v_hat: f64,
    pub expected_cost: f64,
    pub cost_variance: f64,
    pub weights: Vec<f64>,
    pub mean_update_norm: f64,
}

fn log_scores(costs: &[f64], log_priors: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if costs.is_empty() || costs.len() != log_priors.len() {
        return Err(Error::Dimension {
            what: "costs vs log-priors",
            expected: costs.len(),
            got: log_priors.len(),
        });
    }
    if costs.iter().chain(log_priors).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("particle scores"));
    }
    let s: Vec<f64> = costs
        .iter()
        .zip(log_priors)
        .map(|(c, lp)| -c / lambda + lp)
        .collect();
    if s.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    if s.contains(&f64::INFINITY) {
        return Err(Error::NonFinite("particle scores"));
    }
    Ok(s)
}

/// Returns `(max, Σ exp(sᵢ - max))`.
fn shifted_sum(s: &[f64]) -> (f64, f64) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max, s.iter().map(|v| (v - max).exp()).sum())
}

pub fn particle_weights(costs: &[f64], log_priors: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let s = log_scores(costs, log_priors, lambda)?;
    let (max, total) = shifted_sum(&s);
    Ok(s.iter().map(|v| (v - max).exp() / total).collect())
}

pub fn value_estimate(costs: &[f64], log_priors: &[f64], lambda: f64) -> Result<f64> {
    let s = log_scores(costs, log_priors, lambda)?;
    let (max, total) = shifted_sum(&s);
    Ok(-lambda * (max + total.ln()))
}

/// Weighted mean and variance of the costs.
pub fn cost_statistics(costs: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = costs.iter().zip(weights).map(|(c, w)| w * c).sum();
    let var: f64 = costs
        .iter()
        .zip(weights)
        .map(|(c, w)| w * (c - mean).powi(2))
        .sum();
    (mean, var.max(0.0))
}

pub fn report(
    iter: usize,
    costs: &[f64],
    log_priors: &[f64],
    lambda: f64,
    mean_update_norm: f64,
) -> Result<IterationReport> {
    let weights = particle_weights(costs, log_priors, lambda)?;
    let v_hat = value_estimate(costs, log_priors, lambda)?;
    let (expected_cost, cost_variance) = cost_statistics(costs, &weights);
    Ok(IterationReport {
        iter,
        v_hat,
        expected_cost,
        cost_variance,
        weights,
        mean_update_norm,
    })
}
