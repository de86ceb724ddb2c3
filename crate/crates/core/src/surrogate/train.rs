use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{grid_to_tensor, DcnnModel};
use crate::error::{Error, Result};
use crate::nn::{bce_loss, AdaDelta, Layer, ParamGrads, Tensor3};
use crate::reduce::{heuristic_search_reduce, ReductionConfig};
use crate::scenario::{canonical_order, encode_image, ImageGrid, NormalizationParams, ScenarioSet};

/// Network input and the teacher's reduced set, both normalized and
/// canonically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: ImageGrid,
    pub target: ImageGrid,
}

impl TrainingPair {
    /// Pairs a raw set with an already computed teacher reduction of it.
    pub fn from_teacher(set: &ScenarioSet, teacher: &ScenarioSet, norm: &NormalizationParams) -> Result<Self> {
        Ok(Self {
            input: encode_image(&canonical_order(&norm.apply(set)?)),
            target: encode_image(&canonical_order(&norm.apply(teacher)?)),
        })
    }
}

/// Runs the heuristic-search teacher on the normalized set.
pub fn make_training_pair(set: &ScenarioSet, cfg: &ReductionConfig, norm: &NormalizationParams) -> Result<TrainingPair> {
    if set.size() % cfg.target_size != 0 {
        return Err(Error::SizeNotFactor {
            size: set.size(),
            reduced: cfg.target_size,
        });
    }
    let input_set = canonical_order(&norm.apply(set)?);
    let teacher = heuristic_search_reduce(&input_set, cfg)?;
    Ok(TrainingPair {
        input: encode_image(&input_set),
        target: encode_image(&canonical_order(&teacher)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub optimizer: AdaDelta,
    /// Pairs per data-parallel work unit. Gradients are summed inside a chunk
    /// and then across chunks in order, so results do not depend on the
    /// thread count.
    pub chunk_size: usize,
}

impl TrainOptions {
    pub fn new(epochs: usize) -> Self {
        Self {
            epochs,
            optimizer: AdaDelta::default(),
            chunk_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training BCE at the start of each epoch.
    pub train_loss: Vec<f64>,
    /// Mean held-out BCE at the start of each epoch; empty without a test split.
    pub test_loss: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    pub epochs: usize,
    pub wall_clock_secs: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

struct Prepared {
    input: Tensor3,
    target: Tensor3,
}

fn prepare(model: &DcnnModel, pairs: &[TrainingPair]) -> Result<Vec<Prepared>> {
    let dims = model.dims();
    pairs
        .iter()
        .map(|p| {
            Ok(Prepared {
                input: grid_to_tensor(&p.input, dims.input_dims())?,
                target: grid_to_tensor(&p.target, dims.output_dims())?,
            })
        })
        .collect()
}

fn mean_loss(model: &DcnnModel, data: &[Prepared]) -> Result<f64> {
    let losses: Vec<f64> = data
        .par_iter()
        .map(|p| Ok(bce_loss(&model.forward_tensor(&p.input)?, &p.target)?.0))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Mean BCE of the model over `pairs`.
pub fn evaluate_loss(model: &DcnnModel, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    mean_loss(model, &prepare(model, pairs)?)
}

/// Summed loss and gradients over a slice of pairs.
fn accumulate(model: &DcnnModel, data: &[Prepared]) -> Result<(f64, Vec<ParamGrads>)> {
    let net = model.net();
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    for p in data {
        let trace = net.forward_trace(p.input.clone())?;
        let (l, g) = bce_loss(trace.output(), &p.target)?;
        loss += l;
        net.backward(&trace, &g, &mut grads)?;
    }
    Ok((loss, grads))
}

pub fn train(
    model: &mut DcnnModel,
    pairs: &[TrainingPair],
    test_pairs: &[TrainingPair],
    options: &TrainOptions,
) -> Result<TrainReport> {
    train_with_progress(model, pairs, test_pairs, options, |_| {})
}

/// Full-batch AdaDelta on the mean BCE over `pairs`. Losses are recorded
/// before each update.
pub fn train_with_progress(
    model: &mut DcnnModel,
    pairs: &[TrainingPair],
    test_pairs: &[TrainingPair],
    options: &TrainOptions,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<TrainReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if options.epochs == 0 || options.chunk_size == 0 {
        return Err(Error::InvalidArgument("epochs and chunk size must be positive".into()));
    }
    let start = Instant::now();
    let train_data = prepare(model, pairs)?;
    let test_data = prepare(model, test_pairs)?;
    let scale = 1.0 / train_data.len() as f64;
    let mut train_loss = Vec::with_capacity(options.epochs);
    let mut test_loss = Vec::with_capacity(options.epochs);

    for epoch in 0..options.epochs {
        let partials: Vec<(f64, Vec<ParamGrads>)> = train_data
            .par_chunks(options.chunk_size)
            .map(|chunk| accumulate(model, chunk))
            .collect::<Result<_>>()?;
        let mut parts = partials.into_iter();
        let (mut loss, mut grads) = parts.next().expect("training set is not empty");
        for (l, g) in parts {
            loss += l;
            for (acc, part) in grads.iter_mut().zip(&g) {
                acc.add_assign(part);
            }
        }
        loss *= scale;
        let held_out = if test_data.is_empty() {
            None
        } else {
            Some(mean_loss(model, &test_data)?)
        };
        if !loss.is_finite() || held_out.is_some_and(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("train loss {loss}, test loss {held_out:?}"),
            });
        }
        train_loss.push(loss);
        test_loss.extend(held_out);
        on_epoch(EpochStats {
            epoch,
            train_loss: loss,
            test_loss: held_out,
        });

        for (layer, mut g) in model.net_mut().layers_mut().iter_mut().zip(grads) {
            if let Some(params) = layer.params_mut() {
                g.scale(scale);
                params.set_gradients(g)?;
                params.adadelta_step(options.optimizer)?;
            }
        }
    }

    let final_train_loss = mean_loss(model, &train_data)?;
    let final_test_loss = if test_data.is_empty() {
        None
    } else {
        Some(mean_loss(model, &test_data)?)
    };
    Ok(TrainReport {
        train_loss,
        test_loss,
        final_train_loss,
        final_test_loss,
        epochs: options.epochs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        seed: model.seed(),
    })
}
