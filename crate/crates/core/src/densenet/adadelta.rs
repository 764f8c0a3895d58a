use super::{DenseNet, Gradients};
use crate::error::{Error, Result};
use crate::Scalar;

/// AdaDelta hyperparameters. `lr` scales the raw update (framework convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaDeltaConfig<S> {
    pub rho: S,
    pub eps: S,
    pub lr: S,
}

impl<S: Scalar> Default for AdaDeltaConfig<S> {
    fn default() -> Self {
        AdaDeltaConfig {
            rho: S::of(0.95),
            eps: S::of(1e-6),
            lr: S::one(),
        }
    }
}

/// Running averages `E[g²]` and `E[Δx²]` for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators<S> {
    pub sq_grad: Vec<S>,
    pub sq_update: Vec<S>,
}

impl<S: Scalar> Accumulators<S> {
    pub fn zeros(n: usize) -> Self {
        Accumulators {
            sq_grad: vec![S::zero(); n],
            sq_update: vec![S::zero(); n],
        }
    }
}

/// One element-wise AdaDelta update of `params` in place.
pub fn adadelta_step<S: Scalar>(
    cfg: &AdaDeltaConfig<S>,
    acc: &mut Accumulators<S>,
    params: &mut [S],
    grads: &[S],
) -> Result<()> {
    if params.len() != grads.len() || acc.sq_grad.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "adadelta block".into(),
            expected: params.len(),
            found: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    let one = S::one();
    for (((p, &g), eg), ex) in params
        .iter_mut()
        .zip(grads)
        .zip(acc.sq_grad.iter_mut())
        .zip(acc.sq_update.iter_mut())
    {
        *eg = cfg.rho * *eg + (one - cfg.rho) * g * g;
        let dx = -((*ex + cfg.eps).sqrt() / (*eg + cfg.eps).sqrt()) * g;
        *ex = cfg.rho * *ex + (one - cfg.rho) * dx * dx;
        *p += cfg.lr * dx;
    }
    Ok(())
}

/// Optimizer state for a whole network: weights then bias per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDelta<S> {
    pub config: AdaDeltaConfig<S>,
    blocks: Vec<(Accumulators<S>, Accumulators<S>)>,
}

impl<S: Scalar> AdaDelta<S> {
    pub fn new(net: &DenseNet<S>, config: AdaDeltaConfig<S>) -> Self {
        let blocks = net
            .layers()
            .iter()
            .map(|l| (Accumulators::zeros(l.weights.len()), Accumulators::zeros(l.bias.len())))
            .collect();
        AdaDelta { config, blocks }
    }

    pub fn step(&mut self, net: &mut DenseNet<S>, grads: &Gradients<S>) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        for ((layer, g), (acc_w, acc_b)) in net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.blocks) {
            adadelta_step(&self.config, acc_w, &mut layer.weights, &g.weights)?;
            adadelta_step(&self.config, acc_b, &mut layer.bias, &g.bias)?;
        }
        Ok(())
    }
}
