//! Verification scoring and the quality-evaluation harness.
//!
//! Comparisons are cosine similarities; a pair is declared a match when its
//! similarity is `>=` the decision threshold.

mod erc;
mod export;
mod verification;

pub use erc::{error_versus_reject, ratio_grid, rejection_count, ErcCurve, ErcPoint, OperatingPoint};
pub use export::{
    export_curve, export_histogram, histogram, read_curve, read_histogram, write_histogram, CurveRow, HistogramBin,
};
pub use verification::{
    compute_scores, cosine_similarity, eer, fmr, fnmr, threshold_at_fmr, EerResult, ScoreSet, ThresholdChoice,
    THRESHOLD_MARGIN,
};
