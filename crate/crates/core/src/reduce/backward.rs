use super::{DistanceMatrix, ReductionConfig};
use crate::error::Result;
use crate::scenario::ScenarioSet;

/// One deletion of the backward reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardStep {
    pub removed: usize,
    pub receiver: usize,
    pub cost: f64,
    /// Total probability held by the survivors after the deletion.
    pub survivor_mass: f64,
}

/// Deletes scenarios one at a time until `target` remain. The deleted
/// scenario minimizes `p_s * min_{s' != s} d(s, s')` over the survivors,
/// using probabilities accumulated so far, and its probability moves to the
/// nearest survivor. Returns the surviving indices (ascending), their
/// probabilities and the deletion log.
pub fn backward_reduction_steps(
    set: &ScenarioSet,
    dist: &DistanceMatrix,
    target: usize,
) -> (Vec<usize>, Vec<f64>, Vec<BackwardStep>) {
    let n = set.size();
    let mut probs = set.probs().to_vec();
    let mut alive = vec![true; n];
    let nearest_of = |s: usize, alive: &[bool]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (0..n).filter(|&j| j != s && alive[j]) {
            let d = dist.get(s, j);
            if d < best.0 {
                best = (d, j);
            }
        }
        best
    };
    let mut nearest: Vec<(f64, usize)> = (0..n).map(|s| nearest_of(s, &alive)).collect();
    let mut steps = Vec::with_capacity(n - target);

    for _ in target..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for s in (0..n).filter(|&s| alive[s]) {
            let cost = probs[s] * nearest[s].0;
            if cost < best.0 || best.1 == usize::MAX {
                best = (cost, s);
            }
        }
        let (cost, removed) = best;
        let receiver = nearest[removed].1;
        alive[removed] = false;
        probs[receiver] += probs[removed];
        probs[removed] = 0.0;
        for s in (0..n).filter(|&s| alive[s]) {
            if nearest[s].1 == removed {
                nearest[s] = nearest_of(s, &alive);
            }
        }
        steps.push(BackwardStep {
            removed,
            receiver,
            cost,
            survivor_mass: (0..n).filter(|&s| alive[s]).map(|s| probs[s]).sum(),
        });
    }

    let survivors: Vec<usize> = (0..n).filter(|&s| alive[s]).collect();
    let weights = survivors.iter().map(|&s| probs[s]).collect();
    (survivors, weights, steps)
}

pub fn simultaneous_backward_reduction(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<ScenarioSet> {
    cfg.check(set)?;
    if cfg.target_size == set.size() {
        return Ok(set.clone());
    }
    let dist = DistanceMatrix::new(set);
    let (survivors, weights, _) = backward_reduction_steps(set, &dist, cfg.target_size);
    set.select(&survivors, weights)
}
