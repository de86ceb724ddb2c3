use super::{fast_forward_indices, redistribute_cached, DistanceMatrix, ReductionConfig};
use crate::error::Result;
use crate::metrics::{combined_objective, DistanceReport};
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub reduced: ScenarioSet,
    /// Kept scenario indices, ascending.
    pub kept: Vec<usize>,
    pub initial: DistanceReport,
    pub result: DistanceReport,
    /// Combined objective after every accepted swap.
    pub accepted: Vec<f64>,
    pub passes: usize,
}

/// Forward selection followed by first-improvement swap hill climbing on
/// `space + lambda * moment`.
///
/// A pass tries, for each kept slot in turn, every unkept scenario as its
/// replacement; a swap is taken as soon as it strictly lowers the objective.
/// The search stops after a pass without any accepted swap or after
/// `max_hs_passes` passes.
pub fn heuristic_search(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<HeuristicOutcome> {
    cfg.check(set)?;
    let n = set.size();
    let dist = DistanceMatrix::new(set);
    let (mut kept, _) = fast_forward_indices(set, &dist, cfg.target_size);
    kept.sort_unstable();

    let evaluate = |kept: &[usize]| -> Result<(ScenarioSet, DistanceReport)> {
        let reduced = redistribute_cached(set, &dist, kept)?;
        let report = combined_objective(set, &reduced, cfg.lambda_moment)?;
        Ok((reduced, report))
    };

    let (mut reduced, initial) = evaluate(&kept)?;
    let mut current = initial;
    let mut in_kept = vec![false; n];
    kept.iter().for_each(|&k| in_kept[k] = true);
    let mut accepted = Vec::new();
    let mut passes = 0;

    while passes < cfg.max_hs_passes {
        passes += 1;
        let mut improved = false;
        for slot in 0..kept.len() {
            for candidate in 0..n {
                if in_kept[candidate] {
                    continue;
                }
                let mut trial = kept.clone();
                trial[slot] = candidate;
                let (trial_set, report) = evaluate(&trial)?;
                if report.combined < current.combined {
                    in_kept[kept[slot]] = false;
                    in_kept[candidate] = true;
                    kept = trial;
                    reduced = trial_set;
                    current = report;
                    accepted.push(report.combined);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by_key(|&i| kept[i]);
    let reduced = reduced.select(&order, order.iter().map(|&i| reduced.prob(i)).collect())?;
    kept.sort_unstable();
    Ok(HeuristicOutcome {
        reduced,
        kept,
        initial,
        result: current,
        accepted,
        passes,
    })
}

pub fn heuristic_search_reduce(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<ScenarioSet> {
    heuristic_search(set, cfg).map(|o| o.reduced)
}
