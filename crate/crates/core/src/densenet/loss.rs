use crate::error::{Error, Result};
use crate::Scalar;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Per-class binary cross-entropy over sigmoid outputs.
    Bce,
    /// Categorical cross-entropy over softmax outputs.
    SoftmaxCe,
}

impl Loss {
    pub fn output(self) -> super::OutputActivation {
        match self {
            Loss::Bce => super::OutputActivation::Sigmoid,
            Loss::SoftmaxCe => super::OutputActivation::Softmax,
        }
    }

    /// Loss and its gradient with respect to the last pre-activation.
    pub fn evaluate<S: Scalar>(self, probs: &[S], target: &[S]) -> Result<(S, Vec<S>)> {
        match self {
            Loss::Bce => bce_loss(probs, target),
            Loss::SoftmaxCe => softmax_ce_loss(probs, target),
        }
    }
}

fn check_one_hot<S: Scalar>(probs: &[S], target: &[S]) -> Result<()> {
    if probs.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "loss target".into(),
            expected: probs.len(),
            found: target.len(),
        });
    }
    let ones = target.iter().filter(|&&t| t == S::one()).count();
    let zeros = target.iter().filter(|&&t| t == S::zero()).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::invalid("target is not one-hot"));
    }
    Ok(())
}

fn clamp<S: Scalar>(p: S) -> S {
    let c = S::of(PROB_CLAMP);
    p.max(c).min(S::one() - c)
}

/// `-(1/n) Σ [t log p + (1-t) log(1-p)]`; gradient `(p - t)/n` w.r.t. the logits.
pub fn bce_loss<S: Scalar>(probs: &[S], target: &[S]) -> Result<(S, Vec<S>)> {
    check_one_hot(probs, target)?;
    let n = S::from_usize_lossy(probs.len());
    let loss = probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = clamp(p);
            -(t * p.ln() + (S::one() - t) * (S::one() - p).ln())
        })
        .sum::<S>()
        / n;
    let grad = probs.iter().zip(target).map(|(&p, &t)| (p - t) / n).collect();
    Ok((loss, grad))
}

/// `-Σ t log p`; gradient `p - t` w.r.t. the logits.
pub fn softmax_ce_loss<S: Scalar>(probs: &[S], target: &[S]) -> Result<(S, Vec<S>)> {
    check_one_hot(probs, target)?;
    let loss = probs
        .iter()
        .zip(target)
        .filter(|(_, &t)| t == S::one())
        .map(|(&p, _)| -clamp(p).ln())
        .sum::<S>();
    let grad = probs.iter().zip(target).map(|(&p, &t)| p - t).collect();
    Ok((loss, grad))
}
