//! WiFi channel-state-information activity recognition toolkit.
//!
//! The crate covers the full chain from raw captures to dataset-shift reports:
//!
//! * [`ingest`] parses and orders canonical `CSI1` capture files.
//! * [`fft`] and [`spectro`] turn per-packet CSI into pruned amplitude spectrograms
//!   and labeled activity windows.
//! * [`annotate`] aligns camera-frame annotations to packet indices.
//! * [`simcsi`] generates seeded synthetic sessions and shift benchmarks.
//! * [`embed`] is an exact t-SNE.
//! * [`model`] is the convolutional + bidirectional LSTM classifier with a
//!   gradient-reversal domain branch.
//! * [`shift`] quantifies accuracy drops, output-distribution divergence and
//!   embedding separability across partitions.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the two
//! precisions used in practice.

pub mod annotate;
pub mod dataset;
pub mod embed;
pub mod fft;
pub mod ingest;
pub mod model;
pub mod plot;
pub mod scalar;
pub mod shift;
pub mod simcsi;
pub mod spectro;
pub mod tensor_io;

pub use scalar::Scalar;

pub type Spectrogram32 = spectro::Spectrogram<f32>;
pub type Spectrogram64 = spectro::Spectrogram<f64>;
pub type Dataset32 = dataset::LabeledDataset<f32>;
pub type Dataset64 = dataset::LabeledDataset<f64>;
pub type Params32 = model::Parameters<f32>;
pub type Params64 = model::Parameters<f64>;
pub type Embedding32 = embed::Embedding<f32>;
pub type Embedding64 = embed::Embedding<f64>;
