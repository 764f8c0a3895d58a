//! Unsupervised embedding quality estimation from stochastic embedding robustness.
//!
//! A quality score for one input is the agreement between `m` embeddings produced
//! by random dropout subnetworks of a single model: tight clusters score close to
//! one, scattered ones score lower. The crate also carries everything needed to
//! check such a score: a small fully-connected network engine that can be trained
//! on top of frozen embeddings, a synthetic identity-cluster generator, and the
//! usual verification metrics (EER, FNMR at fixed FMR, error-versus-reject curves).
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what the CLI uses.

pub mod dataset;
pub mod densenet;
pub mod error;
pub mod metrics;
pub mod scalar;
pub mod seed;
pub mod serfiq;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = dataset::EmbeddingDataset<f64>;
pub type Record = dataset::EmbeddingRecord<f64>;
pub type Qualities = dataset::QualityTable<f64>;
pub type Net = densenet::DenseNet<f64>;
pub type Scores = metrics::ScoreSet<f64>;
pub type Curve = metrics::ErcCurve;
pub type StochasticSet = serfiq::StochasticEmbeddingSet<f64>;
pub type Quality = serfiq::QualityScore<f64>;

pub type Dataset32 = dataset::EmbeddingDataset<f32>;
pub type Net32 = densenet::DenseNet<f32>;
