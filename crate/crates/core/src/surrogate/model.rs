use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AnyLayer, AvgPool, Conv2d, ConvSpec, Dims, PointwiseDense, Relu, Sequential, Sigmoid, Tensor3};
use crate::scenario::{canonical_order, decode_image, encode_image, ImageGrid, NormalizationParams, ScenarioSet};

/// Output channels of the convolution.
pub const CONV_CHANNELS: usize = 64;
/// Channel widths of the position-wise dense stack after pooling.
pub const DENSE_CHANNELS: [usize; 3] = [32, 8, 1];
/// Identifies the column ordering applied to inputs and targets.
pub const CANONICAL_TAG: &str = "energy-asc/lex/prob-desc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub horizon: usize,
    pub size: usize,
    pub reduced: usize,
    pub filter_width: usize,
}

impl ModelDims {
    pub fn new(horizon: usize, size: usize, reduced: usize, filter_width: usize) -> Result<Self> {
        if horizon == 0 || size == 0 || reduced == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if size % reduced != 0 {
            return Err(Error::SizeNotFactor { size, reduced });
        }
        if filter_width % 2 == 0 {
            return Err(Error::EvenFilterWidth(filter_width));
        }
        Ok(Self {
            horizon,
            size,
            reduced,
            filter_width,
        })
    }

    pub fn pool_width(&self) -> usize {
        self.size / self.reduced
    }

    pub fn input_dims(&self) -> Dims {
        Dims::new(self.horizon + 1, self.size, 1)
    }

    pub fn output_dims(&self) -> Dims {
        Dims::new(self.horizon + 1, self.reduced, 1)
    }
}

/// Convolution `(T+1) x w` with 64 filters, `1 x S/S'` average pooling and
/// dense layers 64 -> 32 -> 8 -> 1 applied at every grid position. ReLU
/// follows every stage except the last, which uses a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct DcnnModel {
    dims: ModelDims,
    net: Sequential,
    normalization: NormalizationParams,
    seed: u64,
}

pub fn build_model(dims: ModelDims, seed: u64) -> Result<DcnnModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = ConvSpec::new(dims.horizon + 1, dims.filter_width, 1, CONV_CHANNELS)?;
    let mut layers = vec![
        AnyLayer::Conv(Conv2d::init(conv, &mut rng)),
        AnyLayer::Relu(Relu),
        AnyLayer::Pool(AvgPool::new(dims.pool_width())?),
        AnyLayer::Relu(Relu),
    ];
    let mut width = CONV_CHANNELS;
    for (i, &out) in DENSE_CHANNELS.iter().enumerate() {
        layers.push(AnyLayer::Dense(PointwiseDense::init(width, out, &mut rng)));
        layers.push(if i + 1 == DENSE_CHANNELS.len() {
            AnyLayer::Sigmoid(Sigmoid)
        } else {
            AnyLayer::Relu(Relu)
        });
        width = out;
    }
    Ok(DcnnModel {
        dims,
        net: Sequential::new(layers),
        normalization: NormalizationParams { v_min: 0.0, v_max: 1.0 },
        seed,
    })
}

impl DcnnModel {
    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn normalization(&self) -> NormalizationParams {
        self.normalization
    }

    pub fn set_normalization(&mut self, normalization: NormalizationParams) {
        self.normalization = normalization;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut Sequential {
        &mut self.net
    }

    /// Output dims after each of the five stages (convolution, pooling and
    /// the three dense layers), activations included.
    pub fn stage_shapes(&self) -> Result<Vec<Dims>> {
        let chain = self.net.shape_chain(self.dims.input_dims())?;
        // Every stage is a layer followed by its activation.
        Ok(chain.iter().skip(1).step_by(2).copied().collect())
    }

    pub fn forward_tensor(&self, input: &Tensor3) -> Result<Tensor3> {
        input.expect_dims(self.dims.input_dims(), "model input")?;
        self.net.forward(input)
    }

    pub fn forward_grid(&self, grid: &ImageGrid) -> Result<ImageGrid> {
        let input = grid_to_tensor(grid, self.dims.input_dims())?;
        let out = self.forward_tensor(&input)?;
        ImageGrid::new(self.dims.horizon + 1, self.dims.reduced, out.into_data())
    }

    pub fn check_set(&self, set: &ScenarioSet) -> Result<()> {
        if set.horizon() != self.dims.horizon || set.size() != self.dims.size {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} scenarios of {} steps, input has {} of {}",
                self.dims.size,
                self.dims.horizon,
                set.size(),
                set.horizon()
            )));
        }
        Ok(())
    }

    /// Normalized, canonically ordered image of a raw scenario set.
    pub fn encode_input(&self, set: &ScenarioSet) -> Result<ImageGrid> {
        self.check_set(set)?;
        Ok(encode_image(&canonical_order(&self.normalization.apply(set)?)))
    }
}

pub fn grid_to_tensor(grid: &ImageGrid, dims: Dims) -> Result<Tensor3> {
    if grid.rows() != dims.height || grid.cols() != dims.width {
        return Err(Error::ShapeMismatch(format!(
            "grid {}x{} does not match {}x{}",
            grid.rows(),
            grid.cols(),
            dims.height,
            dims.width
        )));
    }
    Tensor3::new(dims, grid.data().to_vec())
}

/// Reduces a raw scenario set with one forward pass. Returns the reduced set
/// in raw units and the wall-clock seconds of the forward pass and decoding.
pub fn forward_reduce(model: &DcnnModel, set: &ScenarioSet) -> Result<(ScenarioSet, f64)> {
    let grid = model.encode_input(set)?;
    let start = Instant::now();
    let out = model.forward_grid(&grid)?;
    let reduced = model.normalization.invert(&decode_image(&out)?)?;
    Ok((reduced, start.elapsed().as_secs_f64()))
}
