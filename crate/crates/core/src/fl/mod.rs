//! Models, local SGD and aggregation.
//!
//! Models are small enough to keep as flat `Vec<f64>` parameter vectors:
//! multinomial logistic regression and a one-hidden-layer MLP, both trained on
//! mean cross-entropy with hand-written gradients.

pub mod aggregate;
pub mod checkpoint;
pub mod model;
pub mod train;

use thiserror::Error;

pub use aggregate::{global_aggregate, intra_cluster_aggregate};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use model::{evaluate, init_model, Layout, ModelParams};
pub use train::{local_update, LocalPass, LrSchedule, TrainConfig};

#[derive(Debug, Error)]
pub enum FlError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
