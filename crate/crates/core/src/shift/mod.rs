//! Dataset-shift measurement: accuracy drops across partitions, divergence
//! between train and test softmax outputs, and separability of learned
//! features in a t-SNE embedding.

mod experiment;
mod metrics;

pub use experiment::{
    GrlDomains,
    confusion_csv, run_shift_experiment, ShiftOptions, ShiftReport, Strategy, StrategyResult,
};
pub use metrics::{cluster_separability, distribution_divergence, js_divergence, mean_softmax_by_class, output_distribution};

#[derive(Debug, thiserror::Error)]
pub enum ShiftError {
    #[error("need at least two groups")]
    NeedTwoGroups,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row {0} is not a probability vector")]
    NotProbability(usize),
    #[error("no strategies requested")]
    NoStrategies,
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
}

pub type Result<T> = std::result::Result<T, ShiftError>;
