use crate::dataset::{EmbeddingDataset, Pair, PairProtocol};
use crate::error::{Error, Result};
use crate::Scalar;

/// Offset used to place a threshold strictly above (or below) an extreme score.
pub const THRESHOLD_MARGIN: f64 = 1e-9;

pub(crate) fn margin<S: Scalar>(s: S) -> S {
    // 1e-9 is below the resolution of f32 near 1, so widen it when needed
    let rel = S::epsilon() * S::of(4.0) * s.abs().max(S::one());
    S::of(THRESHOLD_MARGIN).max(rel)
}

/// Threshold separating `lo < hi`: their midpoint, or `hi` when the two are so
/// close that the midpoint rounds onto `lo`.
pub(crate) fn split<S: Scalar>(lo: S, hi: S) -> S {
    let mid = (lo + hi) / S::of(2.0);
    if mid > lo {
        mid
    } else {
        hi
    }
}

pub fn cosine_similarity<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine similarity".into(),
            expected: a.len(),
            found: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (S::zero(), S::zero(), S::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == S::zero() || nb == S::zero() {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot / (na * nb).sqrt()).max(-S::one()).min(S::one()))
}

/// Genuine and impostor comparison scores for one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<S> {
    pub genuine: Vec<(Pair, S)>,
    pub impostor: Vec<(Pair, S)>,
}

impl<S: Scalar> ScoreSet<S> {
    pub fn genuine_scores(&self) -> Vec<S> {
        self.genuine.iter().map(|(_, s)| *s).collect()
    }

    pub fn impostor_scores(&self) -> Vec<S> {
        self.impostor.iter().map(|(_, s)| *s).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.genuine.is_empty() && self.impostor.is_empty()
    }
}

pub fn compute_scores<S: Scalar>(ds: &EmbeddingDataset<S>, protocol: &PairProtocol) -> Result<ScoreSet<S>> {
    let score = |pairs: &[Pair]| -> Result<Vec<(Pair, S)>> {
        pairs
            .iter()
            .map(|p| {
                let a = ds.get(p.first()).ok_or_else(|| Error::UnknownId(p.first().to_string()))?;
                let b = ds.get(p.second()).ok_or_else(|| Error::UnknownId(p.second().to_string()))?;
                Ok((p.clone(), cosine_similarity(&a.vector, &b.vector)?))
            })
            .collect()
    };
    Ok(ScoreSet {
        genuine: score(&protocol.genuine)?,
        impostor: score(&protocol.impostor)?,
    })
}

/// Fraction of impostor scores `>= threshold`.
pub fn fmr<S: Scalar>(impostor: &[S], threshold: S) -> Result<f64> {
    if impostor.is_empty() {
        return Err(Error::Empty("impostor scores".into()));
    }
    Ok(impostor.iter().filter(|&&s| s >= threshold).count() as f64 / impostor.len() as f64)
}

/// Fraction of genuine scores `< threshold`.
pub fn fnmr<S: Scalar>(genuine: &[S], threshold: S) -> Result<f64> {
    if genuine.is_empty() {
        return Err(Error::Empty("genuine scores".into()));
    }
    Ok(genuine.iter().filter(|&&s| s < threshold).count() as f64 / genuine.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice<S> {
    pub threshold: S,
    pub target_fmr: f64,
    /// FMR actually reached; below the target when ties prevent hitting it.
    pub achieved_fmr: f64,
}

/// `⌊target · n⌋`, tolerant of products like `0.29 · 100` landing just below an integer.
pub(crate) fn allowed_false_matches(target: f64, n: usize) -> usize {
    (((target * n as f64) + 1e-9).floor() as usize).min(n - 1)
}

/// Threshold whose FMR is the largest achievable value not above `target`.
///
/// With impostor scores sorted descending and `k = ⌊target·N⌋`, the threshold is
/// the midpoint of the `k`-th and `k+1`-th scores. If those two are tied the whole
/// tie tier is excluded: the threshold moves to the midpoint between the tier and
/// the next higher score, or just above the maximum.
pub fn threshold_at_fmr<S: Scalar>(impostor: &[S], target: f64) -> Result<ThresholdChoice<S>> {
    if impostor.is_empty() {
        return Err(Error::Empty("impostor scores".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target FMR {target} outside (0, 1)")));
    }
    let mut sorted = impostor.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let k = allowed_false_matches(target, sorted.len());
    // first index of the tier holding the (k+1)-th score
    let below = sorted[k];
    let tier_start = sorted[..k].iter().position(|&s| s == below).unwrap_or(k);
    let threshold = if tier_start == 0 {
        sorted[0] + margin(sorted[0])
    } else {
        split(below, sorted[tier_start - 1])
    };
    Ok(ThresholdChoice {
        threshold,
        target_fmr: target,
        achieved_fmr: fmr(impostor, threshold)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult<S> {
    pub eer: f64,
    pub threshold: S,
    pub fmr: f64,
    pub fnmr: f64,
}

/// Equal error rate by a sweep over all distinct decision thresholds.
///
/// Candidates are the midpoints between consecutive distinct pooled scores plus
/// one sentinel below the minimum and one above the maximum. The candidate with
/// the smallest `|FMR - FNMR|` wins (the lowest one on ties) and the reported
/// rate is `(FMR + FNMR) / 2` there.
pub fn eer<S: Scalar>(genuine: &[S], impostor: &[S]) -> Result<EerResult<S>> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Empty("EER needs genuine and impostor scores".into()));
    }
    let cmp = |a: &S, b: &S| a.partial_cmp(b).expect("finite scores");
    let mut gen = genuine.to_vec();
    let mut imp = impostor.to_vec();
    gen.sort_by(cmp);
    imp.sort_by(cmp);
    let mut pooled: Vec<S> = gen.iter().chain(&imp).copied().collect();
    pooled.sort_by(cmp);
    pooled.dedup();

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let (mut g_below, mut i_below) = (0usize, 0usize);
    let mut best: Option<(f64, EerResult<S>)> = None;
    for t in candidate_thresholds(&pooled) {
        while g_below < gen.len() && gen[g_below] < t {
            g_below += 1;
        }
        while i_below < imp.len() && imp[i_below] < t {
            i_below += 1;
        }
        let fnmr = g_below as f64 / ng;
        let fmr = (imp.len() - i_below) as f64 / ni;
        let gap = (fmr - fnmr).abs();
        if best.as_ref().is_none_or(|(b, _)| gap < *b) {
            best = Some((
                gap,
                EerResult {
                    eer: (fmr + fnmr) / 2.0,
                    threshold: t,
                    fmr,
                    fnmr,
                },
            ));
        }
    }
    Ok(best.expect("at least two candidates").1)
}

/// Ascending candidate thresholds for a sorted, de-duplicated score list.
pub(crate) fn candidate_thresholds<S: Scalar>(pooled: &[S]) -> impl Iterator<Item = S> + '_ {
    let lo = pooled[0];
    let hi = pooled[pooled.len() - 1];
    std::iter::once(lo - margin(lo))
        .chain(pooled.windows(2).map(|w| split(w[0], w[1])))
        .chain(std::iter::once(hi + margin(hi)))
}
