//! Seeded synthetic CSI sessions.
//!
//! Each subcarrier follows
//! `H(t, f) = G(f) * (1 + m * sum_k a_k sin(2 pi (r d_k t + s_k f / 256))) + noise`
//! where `G` is the environment's static multipath response, `m` and `r` are
//! the person's motion amplitude and rate, and `(d_k, a_k, s_k)` are the
//! activity's modulators. An environment may add ambient clutter terms
//! `c_j sin(2 pi (d_j t + s_j f / 256))` inside the bracket that do not scale
//! with the person.

mod benchmark;
mod profiles;
mod session;

pub use benchmark::{make_benchmark, Benchmark, BenchmarkSpec, SessionRecord};
pub use profiles::{default_templates, ActivityTemplate, Component, EnvProfile, PersonProfile, DEFAULT_CLASSES};
pub use session::{generate_session, Session, SessionSpec, FRAME_INTERVAL_US, IQ_SCALE};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("activity script is empty")]
    EmptyScript,
    #[error("unknown activity class {0:?}")]
    UnknownClass(String),
    #[error("benchmark grid needs >= 2 environments and >= 2 persons, got {envs}x{persons}")]
    GridTooSmall { envs: usize, persons: usize },
    #[error("invalid simulation parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Spectro(#[from] crate::spectro::SpectroError),
    #[error(transparent)]
    Annotate(#[from] crate::annotate::AnnotateError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub type Result<T> = std::result::Result<T, SimError>;
