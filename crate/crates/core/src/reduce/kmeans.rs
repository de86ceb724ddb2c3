use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ReductionConfig;
use crate::error::Result;
use crate::metrics::euclidean;
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub reduced: ScenarioSet,
    pub assignment: Vec<usize>,
    /// Weighted within-cluster cost `sum_s p_s ||x_s - c(s)||^2`, one entry
    /// per assignment step.
    pub costs: Vec<f64>,
    pub iterations: usize,
}

fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded farthest-point start: a random first center, then repeatedly the
/// scenario farthest from all chosen centers.
fn farthest_point_init(set: &ScenarioSet, k: usize, seed: u64) -> Vec<usize> {
    let n = set.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|s| euclidean(set.scenario(s), set.scenario(centers[0])))
        .collect();
    while centers.len() < k {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for s in (0..n).filter(|s| !centers.contains(s)) {
            if nearest[s] > best.0 {
                best = (nearest[s], s);
            }
        }
        let c = best.1;
        centers.push(c);
        for (s, d) in nearest.iter_mut().enumerate() {
            *d = d.min(euclidean(set.scenario(s), set.scenario(c)));
        }
    }
    centers
}

/// Assigns every scenario to its nearest centroid; returns the weighted cost.
fn assign(set: &ScenarioSet, centroids: &[Vec<f64>], assignment: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut cost = 0.0;
    for (s, x) in set.scenarios().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared(x, centroid);
            if d < best.0 {
                best = (d, c);
            }
        }
        assignment[s] = best.1;
        dists[s] = best.0;
        cost += set.prob(s) * best.0;
    }
    cost
}

pub fn weighted_kmeans(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<KMeansOutcome> {
    cfg.check(set)?;
    let (n, k, horizon) = (set.size(), cfg.target_size, set.horizon());
    let mut centroids: Vec<Vec<f64>> = farthest_point_init(set, k, cfg.seed)
        .into_iter()
        .map(|s| set.scenario(s).to_vec())
        .collect();
    let mut assignment = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut costs = vec![assign(set, &centroids, &mut assignment, &mut dists)];
    let mut iterations = 0;

    while iterations < cfg.kmeans_max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; horizon]; k];
        let mut mass = vec![0.0; k];
        let mut members = vec![0usize; k];
        for (s, x) in set.scenarios().enumerate() {
            let c = assignment[s];
            members[c] += 1;
            mass[c] += set.prob(s);
            for (acc, v) in sums[c].iter_mut().zip(x) {
                *acc += set.prob(s) * v;
            }
        }
        let mut reseeded = Vec::new();
        for c in 0..k {
            if members[c] == 0 {
                // Empty cluster: restart it on the worst-served scenario.
                let far = (0..n)
                    .filter(|s| !reseeded.contains(s))
                    .fold((f64::NEG_INFINITY, 0), |best, s| {
                        if dists[s] > best.0 {
                            (dists[s], s)
                        } else {
                            best
                        }
                    })
                    .1;
                reseeded.push(far);
                centroids[c] = set.scenario(far).to_vec();
                dists[far] = 0.0;
            } else if members[c] == 1 {
                let only = assignment.iter().position(|&a| a == c).unwrap();
                centroids[c] = set.scenario(only).to_vec();
            } else if mass[c] > 0.0 {
                centroids[c] = sums[c].iter().map(|v| v / mass[c]).collect();
            } else {
                let mut mean = vec![0.0; horizon];
                for (_, x) in set.scenarios().enumerate().filter(|(s, _)| assignment[*s] == c) {
                    for (m, v) in mean.iter_mut().zip(x) {
                        *m += v / members[c] as f64;
                    }
                }
                centroids[c] = mean;
            }
        }
        let previous = assignment.clone();
        costs.push(assign(set, &centroids, &mut assignment, &mut dists));
        if assignment == previous && reseeded.is_empty() {
            break;
        }
    }

    let mut weights = vec![0.0; k];
    for (s, &c) in assignment.iter().enumerate() {
        weights[c] += set.prob(s);
    }
    let reduced = ScenarioSet::from_weights(centroids.concat(), weights, horizon)?;
    Ok(KMeansOutcome {
        reduced,
        assignment,
        costs,
        iterations,
    })
}

pub fn weighted_kmeans_reduce(set: &ScenarioSet, cfg: &ReductionConfig) -> Result<ScenarioSet> {
    weighted_kmeans(set, cfg).map(|o| o.reduced)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scenario::{canonical_order, test_support::random_set};

    #[test]
    fn identical_pair() {
        let set = ScenarioSet::new(vec![vec![0.2, 0.7], vec![0.2, 0.7]], vec![0.25, 0.75]).unwrap();
        let reduced = weighted_kmeans_reduce(&set, &ReductionConfig::new(1)).unwrap();
        assert_eq!(reduced.scenario(0), &[0.2, 0.7]);
        assert_eq!(reduced.probs(), &[1.0]);
    }

    #[test]
    fn full_size_keeps_every_scenario() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let set = random_set(&mut rng, 9, 4);
        let reduced = weighted_kmeans_reduce(&set, &ReductionConfig::new(9)).unwrap();
        assert_eq!(canonical_order(&reduced), canonical_order(&set));
    }

    #[test]
    fn two_clusters_weighted_centroids() {
        let set = ScenarioSet::new(
            vec![vec![0.0], vec![1.0], vec![10.0], vec![12.0]],
            vec![0.1, 0.3, 0.3, 0.3],
        )
        .unwrap();
        let out = weighted_kmeans(&set, &ReductionConfig::new(2)).unwrap();
        let reduced = canonical_order(&out.reduced);
        assert!((reduced.scenario(0)[0] - 0.75).abs() < 1e-12);
        assert!((reduced.scenario(1)[0] - 11.0).abs() < 1e-12);
        assert!((reduced.prob(0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn cost_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..100 {
            let n = rng.gen_range(2..40);
            let k = rng.gen_range(1..=n);
            let set = random_set(&mut rng, n, 3);
            let cfg = ReductionConfig::new(k).with_seed(rng.gen());
            let out = weighted_kmeans(&set, &cfg).unwrap();
            for pair in out.costs.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{:?}", out.costs);
            }
            assert_eq!(out.reduced.size(), k);
            assert!((out.reduced.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let set = random_set(&mut rng, 30, 5);
        let cfg = ReductionConfig::new(6).with_seed(99);
        assert_eq!(
            weighted_kmeans_reduce(&set, &cfg).unwrap(),
            weighted_kmeans_reduce(&set, &cfg).unwrap()
        );
    }
}
