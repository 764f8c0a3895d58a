//! Quality as stochastic embedding robustness.
//!
//! An input is passed `m` times through random dropout subnetworks of one model.
//! If the resulting embeddings agree, the representation is robust and the input
//! is considered high quality:
//!
//! ```text
//! q(X) = 2 · sigmoid( -(2 / m²) · Σ_{i<j} ‖x_i - x_j‖₂ )
//! ```
//!
//! `q` lies in `(0, 1]` and equals one exactly when all `m` embeddings coincide.

use rayon::prelude::*;

use crate::dataset::{EmbeddingDataset, QualityTable};
use crate::densenet::{DenseNet, DropoutPlan};
use crate::error::{Error, Result};
use crate::scalar::sigmoid;
use crate::{seed, Scalar};

/// The `m` embeddings of one input, one per sampled subnetwork.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticEmbeddingSet<S> {
    vectors: Vec<Vec<S>>,
    source_seed: u64,
}

impl<S: Scalar> StochasticEmbeddingSet<S> {
    pub fn new(vectors: Vec<Vec<S>>, source_seed: u64) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 stochastic embeddings, got {}", vectors.len())));
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "stochastic embedding".into(),
                expected: dim,
                found: v.len(),
            });
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stochastic embedding".into()));
        }
        Ok(StochasticEmbeddingSet { vectors, source_seed })
    }

    pub fn vectors(&self) -> &[Vec<S>] {
        &self.vectors
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    /// Each vector scaled to unit length (zero vectors are left as they are).
    pub fn normalized(&self) -> Self {
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let n = v.iter().map(|&x| x * x).sum::<S>().sqrt();
                if n > S::zero() {
                    v.iter().map(|&x| x / n).collect()
                } else {
                    v.clone()
                }
            })
            .collect();
        StochasticEmbeddingSet {
            vectors,
            source_seed: self.source_seed,
        }
    }
}

/// A quality value in `(0, 1]`; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QualityScore<S>(S);

impl<S: Scalar> QualityScore<S> {
    pub fn value(self) -> S {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full stochastic passes through a dropout model trained on top of the
    /// embeddings; the embedding is read at the layer before the classifier.
    OnTop,
    /// One deterministic pass to the penultimate activation, then stochastic
    /// passes through the last layer only.
    SameModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerConfig {
    pub m: usize,
    pub mode: Mode,
    pub master_seed: u64,
    /// Unit-normalize each stochastic embedding before measuring distances.
    /// Off by default: the quality is defined on raw distances.
    pub normalize: bool,
}

impl Default for SerConfig {
    fn default() -> Self {
        SerConfig {
            m: 100,
            mode: Mode::SameModel,
            master_seed: 0,
            normalize: false,
        }
    }
}

fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum::<S>()
        .sqrt()
}

/// `(2/m²) · Σ_{i<j} ‖x_i - x_j‖₂`.
pub fn mean_pairwise_distance<S: Scalar>(set: &StochasticEmbeddingSet<S>) -> S {
    let xs = &set.vectors;
    let mut total = S::zero();
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            total += euclidean(a, b);
        }
    }
    let m = S::from_usize_lossy(xs.len());
    S::of(2.0) * total / (m * m)
}

/// `2·sigmoid(-d)` for a non-negative mean distance `d`.
///
/// Underflows to zero only for `d` beyond roughly 745 (`f64`) or 103 (`f32`).
pub fn quality_from_distance<S: Scalar>(d: S) -> QualityScore<S> {
    QualityScore(S::of(2.0) * sigmoid(-d))
}

pub fn ser_quality<S: Scalar>(set: &StochasticEmbeddingSet<S>) -> QualityScore<S> {
    quality_from_distance(mean_pairwise_distance(set))
}

/// Seed of stochastic pass `i`.
pub fn pass_seed(master_seed: u64, pass: usize) -> u64 {
    seed::derive2(master_seed, seed::STREAM_PASS, pass as u64)
}

/// Master seed for one image, independent of its position in a dataset.
pub fn record_seed(master_seed: u64, image_id: &str) -> u64 {
    seed::derive2(master_seed, seed::STREAM_RECORD, seed::hash_str(image_id))
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::invalid(format!("m must be at least 2, got {m}")));
    }
    Ok(())
}

pub fn stochastic_set_on_top<S: Scalar>(
    net: &DenseNet<S>,
    embedding: &[S],
    m: usize,
    master_seed: u64,
) -> Result<StochasticEmbeddingSet<S>> {
    check_m(m)?;
    if net.depth() < 2 {
        return Err(Error::invalid("on-top mode needs a network with a classification layer"));
    }
    let upto = net.depth() - 1;
    let vectors = (0..m)
        .map(|i| {
            let acts = net.forward_partial(embedding, DropoutPlan::Stochastic(pass_seed(master_seed, i)), upto)?;
            Ok(acts.outputs.last().unwrap().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticEmbeddingSet::new(vectors, master_seed)
}

pub fn stochastic_set_same_model<S: Scalar>(
    net: &DenseNet<S>,
    raw_input: &[S],
    m: usize,
    master_seed: u64,
) -> Result<StochasticEmbeddingSet<S>> {
    check_m(m)?;
    if net.depth() < 2 {
        return Err(Error::invalid("same-model mode needs at least two layers"));
    }
    let last = net.depth() - 1;
    let a = net.penultimate(raw_input)?;
    let vectors = (0..m)
        .map(|i| net.apply_layer(last, &a, DropoutPlan::Stochastic(pass_seed(master_seed, i))).2)
        .collect();
    StochasticEmbeddingSet::new(vectors, master_seed)
}

pub fn stochastic_set<S: Scalar>(input: &[S], net: &DenseNet<S>, cfg: &SerConfig, master_seed: u64) -> Result<StochasticEmbeddingSet<S>> {
    match cfg.mode {
        Mode::OnTop => stochastic_set_on_top(net, input, cfg.m, master_seed),
        Mode::SameModel => stochastic_set_same_model(net, input, cfg.m, master_seed),
    }
}

/// Quality of one input under `cfg.master_seed`.
pub fn ser_fiq<S: Scalar>(input: &[S], net: &DenseNet<S>, cfg: &SerConfig) -> Result<QualityScore<S>> {
    score_with_seed(input, net, cfg, cfg.master_seed)
}

fn score_with_seed<S: Scalar>(input: &[S], net: &DenseNet<S>, cfg: &SerConfig, master: u64) -> Result<QualityScore<S>> {
    let set = stochastic_set(input, net, cfg, master)?;
    Ok(if cfg.normalize {
        ser_quality(&set.normalized())
    } else {
        ser_quality(&set)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

pub fn score_dataset<S: Scalar>(ds: &EmbeddingDataset<S>, net: &DenseNet<S>, cfg: &SerConfig) -> Result<QualityTable<S>> {
    score_dataset_with(ds, net, cfg, Execution::Parallel)
}

/// Scores every record with a master seed derived from `(cfg.master_seed, image_id)`.
pub fn score_dataset_with<S: Scalar>(
    ds: &EmbeddingDataset<S>,
    net: &DenseNet<S>,
    cfg: &SerConfig,
    exec: Execution,
) -> Result<QualityTable<S>> {
    let one = |r: &crate::dataset::EmbeddingRecord<S>| {
        score_with_seed(&r.vector, net, cfg, record_seed(cfg.master_seed, &r.image_id)).map(|q| (r.image_id.clone(), q.value()))
    };
    let scored: Vec<(String, S)> = match exec {
        Execution::Sequential => ds.records().iter().map(one).collect::<Result<_>>()?,
        Execution::Parallel => ds.records().par_iter().map(one).collect::<Result<_>>()?,
    };
    let mut table = QualityTable::new();
    for (id, q) in scored {
        table.insert(id, q)?;
    }
    Ok(table)
}

/// Deterministic embeddings read at the layer feeding the last one.
pub fn embed_dataset<S: Scalar>(ds: &EmbeddingDataset<S>, net: &DenseNet<S>) -> Result<EmbeddingDataset<S>> {
    let dim = if net.depth() == 1 { net.input_dim() } else { net.spec().layer_dims[net.depth() - 1] };
    ds.map_vectors(dim, |r| net.penultimate(&r.vector))
}
