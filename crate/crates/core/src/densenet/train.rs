use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{AdaDelta, AdaDeltaConfig, DenseNet, DropoutPlan, Gradients, Loss};
use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::{seed, Scalar};

/// Samples per gradient work unit. Fixed so the summation order, and therefore the
/// result, does not depend on the thread count.
const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub shuffle_seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 1024,
            epochs: 100,
            lr: 0.1,
            rho: 0.95,
            eps: 1e-6,
            shuffle_seed: 0,
            loss: Loss::Bce,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<S> {
    /// Mean per-sample loss of every epoch, measured under dropout.
    pub loss_history: Vec<S>,
    /// Identity label of each output unit.
    pub labels: Vec<String>,
}

/// Trains `net` to classify the dataset identities (sorted label order).
///
/// Each sample presentation gets its own dropout mask seeded by
/// `(shuffle_seed, epoch, record position)`.
pub fn train<S: Scalar>(net: &mut DenseNet<S>, ds: &EmbeddingDataset<S>, cfg: &TrainConfig) -> Result<TrainReport<S>> {
    let labels: Vec<String> = ds.identities().map(str::to_string).collect();
    if net.output_dim() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "network outputs vs dataset identities".into(),
            expected: labels.len(),
            found: net.output_dim(),
        });
    }
    if net.input_dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            context: "network input vs embedding dimension".into(),
            expected: ds.dim(),
            found: net.input_dim(),
        });
    }
    if net.spec().output != cfg.loss.output() {
        return Err(Error::invalid(format!(
            "loss {:?} needs a {} output layer, network has {}",
            cfg.loss,
            cfg.loss.output().name(),
            net.spec().output.name()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if cfg.epochs > 0 && ds.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    for (name, v) in [("lr", cfg.lr), ("eps", cfg.eps)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
    }
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) {
        return Err(Error::invalid("rho must lie in (0, 1)"));
    }

    let mut label_of = vec![0usize; ds.len()];
    for (k, positions) in ds.identity_index().values().enumerate() {
        for &p in positions {
            label_of[p] = k;
        }
    }

    let mut opt = AdaDelta::new(
        net,
        AdaDeltaConfig {
            rho: S::of(cfg.rho),
            eps: S::of(cfg.eps),
            lr: S::of(cfg.lr),
        },
    );
    let dropout_base = seed::derive(cfg.shuffle_seed, seed::STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive2(cfg.shuffle_seed, seed::STREAM_SHUFFLE, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_loss = S::zero();
        for batch in order.chunks(cfg.batch_size) {
            let partials: Vec<(Gradients<S>, S)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = Gradients::zeros_like(net);
                    let mut loss = S::zero();
                    for &pos in chunk {
                        let plan = DropoutPlan::Stochastic(seed::derive2(dropout_base, epoch as u64, pos as u64));
                        let (l, sg) = sample_gradient(net, &ds.records()[pos].vector, label_of[pos], plan, cfg.loss)?;
                        g.add_assign(&sg);
                        loss += l;
                    }
                    Ok((g, loss))
                })
                .collect::<Result<_>>()?;
            let mut iter = partials.into_iter();
            let (mut grads, mut batch_loss) = iter.next().expect("non-empty batch");
            for (g, l) in iter {
                grads.add_assign(&g);
                batch_loss += l;
            }
            grads.scale(S::one() / S::from_usize_lossy(batch.len()));
            opt.step(net, &grads)?;
            epoch_loss += batch_loss;
        }
        history.push(epoch_loss / S::from_usize_lossy(ds.len()));
    }

    Ok(TrainReport {
        loss_history: history,
        labels,
    })
}

/// Loss and parameter gradients for one labelled sample under `plan`.
pub(crate) fn sample_gradient<S: Scalar>(
    net: &DenseNet<S>,
    x: &[S],
    label: usize,
    plan: DropoutPlan,
    loss: Loss,
) -> Result<(S, Gradients<S>)> {
    let acts = net.forward(x, plan)?;
    let mut target = vec![S::zero(); net.output_dim()];
    target[label] = S::one();
    let (l, dz) = loss.evaluate(acts.output(), &target)?;
    Ok((l, net.backward(&acts, &dz)?))
}
