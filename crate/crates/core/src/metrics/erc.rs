//! Error-versus-reject curves: verification error on the population that
//! survives after discarding the lowest-quality images.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use super::verification::{eer, fmr, fnmr, threshold_at_fmr, ScoreSet};
use crate::dataset::QualityTable;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingPoint {
    Eer,
    FnmrAtFmr(f64),
}

impl OperatingPoint {
    /// Short filesystem-friendly tag, e.g. `eer` or `fnmr_at_fmr_0.001`.
    pub fn tag(&self) -> String {
        match self {
            OperatingPoint::Eer => "eer".into(),
            OperatingPoint::FnmrAtFmr(t) => format!("fnmr_at_fmr_{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErcPoint {
    pub ratio: f64,
    pub error: f64,
    /// FMR on the surviving impostors: at the frozen threshold for FNMR curves,
    /// at the EER threshold for EER curves.
    pub achieved_fmr: Option<f64>,
    pub rejected_images: usize,
    pub surviving_genuine: usize,
    pub surviving_impostor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErcCurve {
    pub points: Vec<ErcPoint>,
    pub operating_point: OperatingPoint,
    pub label: String,
}

impl ErcCurve {
    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Trapezoidal area under the (ratio, error) polyline.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].ratio - w[0].ratio) * (w[0].error + w[1].error) / 2.0)
            .sum()
    }
}

/// Number of images rejected at ratio `r`: `⌈r·n⌉`, tolerant of rounding noise in `r·n`.
pub fn rejection_count(ratio: f64, n: usize) -> usize {
    (((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// `0, step, 2·step, ...` up to and including `max` (within rounding).
pub fn ratio_grid(step: f64, max: f64) -> Vec<f64> {
    let n = ((max / step) + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Computes the curve at every ratio in `ratios`.
///
/// Images are ranked by ascending quality (ties by image id); at ratio `r` the
/// first `⌈r·N⌉` are rejected, where `N` counts the distinct images of the
/// protocol, and a pair survives only if both its images do. For
/// [`OperatingPoint::FnmrAtFmr`] the threshold is fixed once on the full impostor
/// set; EER is recomputed on each surviving population. Ratios whose surviving
/// population cannot produce the error are left out of the curve.
pub fn error_versus_reject<S: Scalar, Q: Scalar>(
    scores: &ScoreSet<S>,
    qualities: &QualityTable<Q>,
    ratios: &[f64],
    op: OperatingPoint,
) -> Result<ErcCurve> {
    if ratios.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(Error::invalid("rejection ratios must lie in [0, 1)"));
    }
    if ratios.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("rejection ratios must be strictly increasing"));
    }

    let images: BTreeSet<&str> = scores
        .genuine
        .iter()
        .chain(&scores.impostor)
        .flat_map(|(p, _)| [p.first(), p.second()])
        .collect();
    let mut ranked: Vec<(&str, Q)> = images
        .iter()
        .map(|&id| {
            qualities
                .get(id)
                .map(|q| (id, q))
                .ok_or_else(|| Error::UnknownId(format!("{id} (no quality score)")))
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite qualities").then(a.0.cmp(b.0)));

    let frozen = match op {
        OperatingPoint::FnmrAtFmr(target) => Some(threshold_at_fmr(&scores.impostor_scores(), target)?.threshold),
        OperatingPoint::Eer => None,
    };

    let points = ratios
        .par_iter()
        .map(|&ratio| {
            let rejected = rejection_count(ratio, ranked.len());
            let gone: HashSet<&str> = ranked[..rejected].iter().map(|(id, _)| *id).collect();
            let keep = |pairs: &[(crate::dataset::Pair, S)]| -> Vec<S> {
                pairs
                    .iter()
                    .filter(|(p, _)| !gone.contains(p.first()) && !gone.contains(p.second()))
                    .map(|(_, s)| *s)
                    .collect()
            };
            let gen = keep(&scores.genuine);
            let imp = keep(&scores.impostor);
            let (error, achieved_fmr) = match frozen {
                Some(threshold) => {
                    if gen.is_empty() {
                        return None;
                    }
                    let achieved = if imp.is_empty() { None } else { fmr(&imp, threshold).ok() };
                    (fnmr(&gen, threshold).ok()?, achieved)
                }
                None => {
                    let r = eer(&gen, &imp).ok()?;
                    (r.eer, Some(r.fmr))
                }
            };
            Some(ErcPoint {
                ratio,
                error,
                achieved_fmr,
                rejected_images: rejected,
                surviving_genuine: gen.len(),
                surviving_impostor: imp.len(),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    Ok(ErcCurve {
        points,
        operating_point: op,
        label: String::new(),
    })
}
