//! The 60 → 128 → 64 → 32 → 6 ReLU estimator, backpropagation, Adam
//! training and checkpoints. Everything is `f64`.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{Gradients, Layer, MlpModel, DEFAULT_WIDTHS};
pub use train::{evaluate, train, Adam, Evaluation, TrainConfig, TrainReport};

use thiserror::Error;

use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("loss became non-finite ({loss}) in epoch {epoch}; check the learning rate and target scaling")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
