//! A convolutional network that maps the image of a scenario set to the
//! image of its reduced set, trained to imitate the heuristic-search reducer.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_model, save_model, to_bytes, from_bytes, CHECKPOINT_MAGIC};
pub use model::{build_model, forward_reduce, grid_to_tensor, DcnnModel, ModelDims, CANONICAL_TAG, CONV_CHANNELS, DENSE_CHANNELS};
pub use train::{evaluate_loss, make_training_pair, train, train_with_progress, EpochStats, TrainOptions, TrainReport, TrainingPair};
