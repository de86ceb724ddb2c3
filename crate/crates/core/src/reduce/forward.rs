use super::{redistribute_cached, DistanceMatrix, ReductionConfig};
use crate::error::Result;
use crate::scenario::ScenarioSet;

/// Greedy forward selection. Returns the selected indices in selection order
/// and the final transport cost `sum_{s not selected} p_s * d(s, selected)`.
///
/// Each scenario's distance to the current selection is cached, so a full run
/// costs `O(S^2 * target)` distance lookups.
pub fn fast_forward_indices(set: &ScenarioSet, dist: &DistanceMatrix, target: usize) -> (Vec<usize>, f64) {
    let n = set.size();
    let probs = set.probs();
    let mut selected = Vec::with_capacity(target);
    let mut is_selected = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut objective = 0.0;

    for _ in 0..target {
        let mut best = (f64::INFINITY, usize::MAX);
        for u in (0..n).filter(|&u| !is_selected[u]) {
            let cost: f64 = (0..n)
                .filter(|&s| s != u && !is_selected[s])
                .map(|s| probs[s] * nearest[s].min(dist.get(s, u)))
                .sum();
            if cost < best.0 {
                best = (cost, u);
            }
        }
        let (cost, u) = best;
        selected.push(u);
        is_selected[u] = true;
        for (s, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist.get(s, u));
        }
        objective = cost;
    }
    (selected, objective)
}

pub fn fast_forward_selection(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<ScenarioSet> {
    cfg.check(set)?;
    let dist = DistanceMatrix::new(set);
    let (mut selected, _) = fast_forward_indices(set, &dist, cfg.target_size);
    selected.sort_unstable();
    redistribute_cached(set, &dist, &selected)
}
