//! Exact O(N^2) t-SNE.

mod affinity;
mod tsne;

pub use affinity::{conditional_affinities, kl_cost, student_t_affinities, symmetrize, ConditionalAffinities, Q_FLOOR};
pub use tsne::{kl_gradient, tsne, tsne_from, EmbedConfig, Embedding, MAX_POINTS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("perplexity {perplexity} must be in (1, {max}) for {n} points")]
    PerplexityTooLarge { perplexity: f64, n: usize, max: f64 },
    #[error("all points are identical")]
    DegenerateData,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("{0} points exceed the exact-algorithm limit")]
    TooManyPoints(usize),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EmbedError>;
