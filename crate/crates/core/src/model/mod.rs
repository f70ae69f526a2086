//! Three conv blocks (conv -> batch-norm -> ReLU -> max-pool) feeding three
//! stacked bidirectional LSTMs, with a softmax class head on the final-step
//! features and an optional domain head behind a gradient-reversal layer.
//!
//! All passes are written out by hand; [`loss_and_grad`] returns gradients for
//! every trainable tensor in the flat layout of [`Parameters`].

mod adam;
mod config;
mod eval;
mod layers;
mod lstm;
mod network;
mod params;
mod train;

pub use adam::Adam;
pub use config::{BlockShape, DomainBranch, GrlSchedule, ModelConfig};
pub use eval::{confusion_from_logits, evaluate, features, softmax, EvalResult};
pub use layers::GradientReversal;
pub use network::{forward, loss_and_grad, losses, Batch, ForwardOutput, Gradients, Mode, Target};
pub use params::{Checkpoint, Parameters, Segment};
pub use train::{few_shot_adapt, select_support, train, train_with, EpochRecord, History, TrainConfig, TrainSetup};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("label {label} out of range for {n} outputs")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("support set has no sample of class {0}")]
    MissingClassInSupport(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] crate::tensor_io::TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
