//! Scenario sets, min-max normalization, canonical column ordering and the
//! `(T+1) x S` image encoding consumed by the surrogate network.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Construction accepts probability vectors whose sum is this close to 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Sums closer to 1 than this are left untouched, so that already
/// normalized probabilities survive a rebuild bit-for-bit.
const RENORMALIZE_SLACK: f64 = 1e-12;

/// A discrete distribution over `S` trajectories of `T` steps each.
///
/// Values are stored row-major: scenario `s` occupies
/// `values[s * horizon..(s + 1) * horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    values: Vec<f64>,
    probs: Vec<f64>,
    horizon: usize,
}

impl ScenarioSet {
    /// Validates rows and probabilities. Probabilities within
    /// [`PROB_SUM_TOLERANCE`] of summing to 1 are renormalized.
    pub fn new(rows: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let horizon = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((s, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != horizon) {
            return Err(Error::DimensionMismatch(format!(
                "scenario {s} has {} steps, expected {horizon}",
                row.len()
            )));
        }
        let values = rows.into_iter().flatten().collect();
        Self::from_flat(values, probs, horizon)
    }

    /// Same as [`ScenarioSet::new`] for an already flattened `S x T` buffer.
    pub fn from_flat(values: Vec<f64>, probs: Vec<f64>, horizon: usize) -> Result<Self> {
        let size = probs.len();
        if size == 0 || horizon == 0 {
            return Err(Error::EmptySet);
        }
        if values.len() != size * horizon {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {size} scenarios of {horizon} steps",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                scenario: i / horizon,
                step: i % horizon,
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::ProbabilitySumOutOfTolerance { sum: value });
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::ProbabilitySumOutOfTolerance { sum });
        }
        Ok(Self {
            values,
            probs: renormalized(probs, sum),
            horizon,
        })
    }

    /// Builds a set from nonnegative weights of arbitrary positive total.
    pub(crate) fn from_weights(values: Vec<f64>, weights: Vec<f64>, horizon: usize) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::AllZeroProbabilityRow);
        }
        let probs = renormalized(weights, sum);
        Self::from_flat(values, probs, horizon)
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.probs[s]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scenario(&self, s: usize) -> &[f64] {
        &self.values[s * self.horizon..(s + 1) * self.horizon]
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.horizon)
    }

    /// New set built from the listed scenarios, probabilities taken from `weights`.
    pub(crate) fn select(&self, indices: &[usize], weights: Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.horizon);
        for &i in indices {
            values.extend_from_slice(self.scenario(i));
        }
        Self::from_weights(values, weights, self.horizon)
    }

    /// Applies `f` to every value, keeping probabilities.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_flat(values, self.probs.clone(), self.horizon)
    }

    /// Smallest and largest value over all scenarios.
    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn renormalized(mut probs: Vec<f64>, sum: f64) -> Vec<f64> {
    if (sum - 1.0).abs() > RENORMALIZE_SLACK {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    probs
}

/// Min-max scaling parameters shared by a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub v_min: f64,
    pub v_max: f64,
}

impl NormalizationParams {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self> {
        if !v_min.is_finite() || !v_max.is_finite() || v_max < v_min {
            return Err(Error::InvalidArgument(format!(
                "normalization range [{v_min}, {v_max}] is invalid"
            )));
        }
        Ok(Self { v_min, v_max })
    }

    /// Range covering every value of every set in `corpus`.
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a ScenarioSet>) -> Result<Self> {
        let (lo, hi) = corpus
            .into_iter()
            .map(ScenarioSet::value_range)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            });
        if lo > hi {
            return Err(Error::EmptyCorpus);
        }
        Self::new(lo, hi)
    }

    /// A constant corpus cannot be scaled; it maps to all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.v_max <= self.v_min
    }

    pub fn scale(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (v - self.v_min) / (self.v_max - self.v_min)
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            self.v_min
        } else {
            v * (self.v_max - self.v_min) + self.v_min
        }
    }

    pub fn apply(&self, set: &ScenarioSet) -> Result<ScenarioSet> {
        set.map_values(|v| self.scale(v))
    }

    pub fn invert(&self, set: &ScenarioSet) -> Result<ScenarioSet> {
        set.map_values(|v| self.unscale(v))
    }
}

/// Scales a single set by its own range.
pub fn normalize(set: &ScenarioSet) -> Result<(ScenarioSet, NormalizationParams)> {
    let (lo, hi) = set.value_range();
    let params = NormalizationParams::new(lo, hi)?;
    Ok((params.apply(set)?, params))
}

pub fn denormalize(set: &ScenarioSet, params: &NormalizationParams) -> Result<ScenarioSet> {
    params.invert(set)
}

/// Dense `(T+1) x S` matrix: column `s` holds scenario `s` followed by its
/// probability in the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols == 0 {
            return Err(Error::EmptyGrid);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged grid rows".into()));
        }
        Self::new(n, cols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.cols).map(<[f64]>::to_vec).collect()
    }
}

pub fn encode_image(set: &ScenarioSet) -> ImageGrid {
    let (t_len, s_len) = (set.horizon(), set.size());
    let mut data = vec![0.0; (t_len + 1) * s_len];
    for (s, scenario) in set.scenarios().enumerate() {
        for (t, &v) in scenario.iter().enumerate() {
            data[t * s_len + s] = v;
        }
        data[t_len * s_len + s] = set.prob(s);
    }
    ImageGrid {
        rows: t_len + 1,
        cols: s_len,
        data,
    }
}

/// Inverse of [`encode_image`]. Negative entries of the probability row are
/// clamped to zero before the row is renormalized.
pub fn decode_image(grid: &ImageGrid) -> Result<ScenarioSet> {
    if grid.rows < 2 || grid.cols == 0 {
        return Err(Error::EmptyGrid);
    }
    let (t_len, s_len) = (grid.rows - 1, grid.cols);
    let mut values = vec![0.0; t_len * s_len];
    for t in 0..t_len {
        for s in 0..s_len {
            values[s * t_len + t] = grid.get(t, s);
        }
    }
    let weights: Vec<f64> = (0..s_len).map(|s| grid.get(t_len, s).max(0.0)).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFiniteValue {
            scenario: 0,
            step: t_len,
        });
    }
    ScenarioSet::from_weights(values, weights, t_len)
}

fn compare_columns(set: &ScenarioSet, a: usize, b: usize, energy: &[f64]) -> Ordering {
    energy[a]
        .total_cmp(&energy[b])
        .then_with(|| {
            set.scenario(a)
                .iter()
                .zip(set.scenario(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| set.prob(b).total_cmp(&set.prob(a)))
}

/// Permutation putting scenarios in ascending total energy, ties by
/// lexicographic values, then by descending probability.
pub fn canonical_permutation(set: &ScenarioSet) -> Vec<usize> {
    let energy: Vec<f64> = set.scenarios().map(|s| s.iter().sum()).collect();
    let mut order: Vec<usize> = (0..set.size()).collect();
    order.sort_by(|&a, &b| compare_columns(set, a, b, &energy));
    order
}

pub fn canonical_order(set: &ScenarioSet) -> ScenarioSet {
    let order = canonical_permutation(set);
    let mut values = Vec::with_capacity(set.values.len());
    for &i in &order {
        values.extend_from_slice(set.scenario(i));
    }
    ScenarioSet {
        values,
        probs: order.iter().map(|&i| set.prob(i)).collect(),
        horizon: set.horizon,
    }
}

/// Seeded shuffle followed by a split at `round(train_fraction * N)`.
pub fn split_train_test<T: Clone>(
    corpus: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * corpus.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}
