use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the scenario reduction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative probability {value} at scenario {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, which is not within tolerance of 1")]
    ProbabilitySumOutOfTolerance { sum: f64 },
    #[error("non-finite value at scenario {scenario}, step {step}")]
    NonFiniteValue { scenario: usize, step: usize },
    #[error("scenario set is empty")]
    EmptySet,
    #[error("image grid is empty or has fewer than two rows")]
    EmptyGrid,
    #[error("probability row of the grid sums to zero")]
    AllZeroProbabilityRow,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("horizon mismatch: original has {original} steps, reduced has {reduced}")]
    HorizonMismatch { original: usize, reduced: usize },
    #[error("reduced scenario set is empty")]
    EmptyReducedSet,

    #[error("target size {target} exceeds scenario count {available}")]
    TargetTooLarge { target: usize, available: usize },
    #[error("kept index set is empty")]
    EmptyKeptSet,
    #[error("index {index} out of range for {len} scenarios")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown reduction method `{0}`")]
    UnknownMethod(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("width {width} is not divisible by pool width {pool}")]
    WidthNotDivisible { width: usize, pool: usize },
    #[error("backward pass called without a matching forward cache")]
    MissingForwardCache,
    #[error("optimizer step requested before gradients were computed")]
    UninitializedGradient,
    #[error("reduced size {reduced} is not a factor of scenario count {size}")]
    SizeNotFactor { size: usize, reduced: usize },
    #[error("filter width {0} must be odd")]
    EvenFilterWidth(usize),
    #[error("loss became non-finite at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("model checkpoint format mismatch: found {found:?}")]
    FormatVersionMismatch { found: String },
    #[error("model checkpoint checksum mismatch")]
    ChecksumMismatch,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: header mismatch: {message}")]
    HeaderMismatch { path: PathBuf, message: String },
    #[error("sunrise {sunrise} / sunset {sunset} is not a valid window for horizon {horizon}")]
    InvalidWindow {
        sunrise: usize,
        sunset: usize,
        horizon: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
