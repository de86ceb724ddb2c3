//! Classic scenario reduction: fast forward selection, simultaneous backward
//! reduction, probability-weighted k-means and a swap-based heuristic search
//! over the combined space/moment objective.
//!
//! All greedy choices break ties towards the lowest scenario index.

mod backward;
mod forward;
mod heuristic;
mod kmeans;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::euclidean;
use crate::scenario::ScenarioSet;

pub use backward::{backward_reduction_steps, simultaneous_backward_reduction, BackwardStep};
pub use forward::{fast_forward_indices, fast_forward_selection};
pub use heuristic::{heuristic_search, heuristic_search_reduce, HeuristicOutcome};
pub use kmeans::{weighted_kmeans, weighted_kmeans_reduce, KMeansOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub target_size: usize,
    pub lambda_moment: f64,
    pub max_hs_passes: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl ReductionConfig {
    pub fn new(target_size: usize) -> Self {
        Self {
            target_size,
            lambda_moment: 1.0,
            max_hs_passes: 50,
            kmeans_max_iters: 100,
            seed: 0,
        }
    }

    pub fn with_lambda(mut self, lambda_moment: f64) -> Self {
        self.lambda_moment = lambda_moment;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn check(&self, set: &ScenarioSet) -> Result<()> {
        if self.target_size == 0 {
            return Err(Error::InvalidArgument("target size must be at least 1".into()));
        }
        if self.target_size > set.size() {
            return Err(Error::TargetTooLarge {
                target: self.target_size,
                available: set.size(),
            });
        }
        Ok(())
    }
}

/// Classic reducers selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ffs,
    Sbr,
    Kmeans,
    Hs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ffs, Method::Sbr, Method::Kmeans, Method::Hs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ffs => "ffs",
            Method::Sbr => "sbr",
            Method::Kmeans => "kmeans",
            Method::Hs => "hs",
        }
    }

    pub fn reduce(self, set: &ScenarioSet, cfg: &ReductionConfig) -> Result<ScenarioSet> {
        match self {
            Method::Ffs => fast_forward_selection(set, cfg),
            Method::Sbr => simultaneous_backward_reduction(set, cfg),
            Method::Kmeans => weighted_kmeans_reduce(set, cfg),
            Method::Hs => heuristic_search_reduce(set, cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Symmetric matrix of pairwise Euclidean distances between scenarios.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(set: &ScenarioSet) -> Self {
        let n = set.size();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(set.scenario(i), set.scenario(j));
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Keeps the listed scenarios; every other scenario hands its probability to
/// its nearest kept scenario (ties to the lowest index). The output lists the
/// kept scenarios in the given order.
pub fn redistribute_probabilities(set: &ScenarioSet, kept_indices: &[usize]) -> Result<ScenarioSet> {
    validate_kept(set, kept_indices)?;
    let weights = redistributed_weights(set.size(), kept_indices, set.probs(), |a, b| {
        euclidean(set.scenario(a), set.scenario(b))
    });
    set.select(kept_indices, weights)
}

pub(crate) fn redistribute_cached(
    set: &ScenarioSet,
    dist: &DistanceMatrix,
    kept_indices: &[usize],
) -> Result<ScenarioSet> {
    let weights = redistributed_weights(set.size(), kept_indices, set.probs(), |a, b| dist.get(a, b));
    set.select(kept_indices, weights)
}

fn validate_kept(set: &ScenarioSet, kept: &[usize]) -> Result<()> {
    if kept.is_empty() {
        return Err(Error::EmptyKeptSet);
    }
    let mut seen = vec![false; set.size()];
    for &k in kept {
        if k >= set.size() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: set.size(),
            });
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidArgument(format!("kept index {k} listed twice")));
        }
    }
    Ok(())
}

fn redistributed_weights(
    n: usize,
    kept: &[usize],
    probs: &[f64],
    dist: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut slot = vec![usize::MAX; n];
    for (pos, &k) in kept.iter().enumerate() {
        slot[k] = pos;
    }
    let mut weights: Vec<f64> = kept.iter().map(|&k| probs[k]).collect();
    for s in (0..n).filter(|&s| slot[s] == usize::MAX) {
        let mut best = (f64::INFINITY, usize::MAX);
        for &k in kept {
            let d = dist(s, k);
            if d < best.0 || (d == best.0 && k < best.1) {
                best = (d, k);
            }
        }
        weights[slot[best.1]] += probs[s];
    }
    weights
}
