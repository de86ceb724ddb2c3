//! Distances between an original scenario set and a reduced one.
//!
//! * space distance: `sum_s p_s * min_j ||x_s - y_j||_2`, the transport cost
//!   of moving every original scenario onto its nearest reduced scenario;
//! * moment distance: per-step gaps of the probability-weighted mean and
//!   variance, averaged over the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

/// Euclidean distance between two trajectories.
pub fn scenario_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(euclidean(a, b))
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_horizons(original: &ScenarioSet, reduced: &ScenarioSet) -> Result<()> {
    if original.horizon() != reduced.horizon() {
        return Err(Error::HorizonMismatch {
            original: original.horizon(),
            reduced: reduced.horizon(),
        });
    }
    Ok(())
}

pub fn space_distance(original: &ScenarioSet, reduced: &ScenarioSet) -> Result<f64> {
    check_horizons(original, reduced)?;
    if reduced.size() == 0 {
        return Err(Error::EmptyReducedSet);
    }
    Ok(original
        .scenarios()
        .zip(original.probs())
        .map(|(x, &p)| {
            let nearest = reduced
                .scenarios()
                .map(|y| euclidean(x, y))
                .fold(f64::INFINITY, f64::min);
            p * nearest
        })
        .sum())
}

/// Probability-weighted mean and variance at every time step.
pub fn step_moments(set: &ScenarioSet) -> (Vec<f64>, Vec<f64>) {
    let horizon = set.horizon();
    let mut mean = vec![0.0; horizon];
    for (x, &p) in set.scenarios().zip(set.probs()) {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += p * v;
        }
    }
    let mut var = vec![0.0; horizon];
    for (x, &p) in set.scenarios().zip(set.probs()) {
        for ((acc, m), v) in var.iter_mut().zip(&mean).zip(x) {
            *acc += p * (v - m) * (v - m);
        }
    }
    (mean, var)
}

pub fn moment_distance(original: &ScenarioSet, reduced: &ScenarioSet) -> Result<f64> {
    check_horizons(original, reduced)?;
    let (mu, var) = step_moments(original);
    let (mu_hat, var_hat) = step_moments(reduced);
    let total: f64 = (0..original.horizon())
        .map(|t| (mu[t] - mu_hat[t]).abs() + (var[t] - var_hat[t]).abs())
        .sum();
    Ok(total / original.horizon() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    #[serde(rename = "space_distance")]
    pub space: f64,
    #[serde(rename = "moment_distance")]
    pub moment: f64,
    pub combined: f64,
    pub lambda_moment: f64,
}

/// `space + lambda_moment * moment`, the objective the heuristic search minimizes.
pub fn combined_objective(
    original: &ScenarioSet,
    reduced: &ScenarioSet,
    lambda_moment: f64,
) -> Result<DistanceReport> {
    if !(lambda_moment >= 0.0) || !lambda_moment.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda_moment must be a finite nonnegative number, got {lambda_moment}"
        )));
    }
    let space = space_distance(original, reduced)?;
    let moment = moment_distance(original, reduced)?;
    Ok(DistanceReport {
        space,
        moment,
        combined: space + lambda_moment * moment,
        lambda_moment,
    })
}
