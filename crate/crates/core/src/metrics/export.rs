//! CSV exports: curves (`rejection_ratio,error,achieved_fmr`) and quality
//! histograms (`bin_low,bin_high,count`).

use std::path::Path;

use super::erc::ErcCurve;
use crate::error::{Error, Result};
use crate::Scalar;

fn csv_fail(e: csv::Error) -> Error {
    Error::format("csv", e.to_string())
}

fn write_bytes(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn export_curve(curve: &ErcCurve, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rejection_ratio", "error", "achieved_fmr"]).map_err(csv_fail)?;
    for p in &curve.points {
        let fmr = p.achieved_fmr.map(|f| f.to_string()).unwrap_or_default();
        w.write_record([p.ratio.to_string(), p.error.to_string(), fmr]).map_err(csv_fail)?;
    }
    write_bytes(path.as_ref(), w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub ratio: f64,
    pub error: f64,
    pub achieved_fmr: Option<f64>,
}

pub fn read_curve(path: impl AsRef<Path>) -> Result<Vec<CurveRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_fail)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_fail)?;
        let at = format!("row {}", i + 1);
        let num = |k: usize| crate::dataset::parse_decimal::<f64>(&row[k], &at);
        out.push(CurveRow {
            ratio: num(0)?,
            error: num(1)?,
            achieved_fmr: if row[2].is_empty() { None } else { Some(num(2)?) },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
pub fn histogram<S: Scalar>(values: impl IntoIterator<Item = S>, bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::invalid(format!("histogram range [{lo}, {hi}] is empty")));
    }
    let width = hi - lo;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            low: lo + width * i as f64 / bins as f64,
            high: lo + width * (i + 1) as f64 / bins as f64,
            count: 0,
        })
        .collect();
    for v in values {
        let v = v.to_f64_lossless();
        if !(lo..=hi).contains(&v) {
            return Err(Error::invalid(format!("value {v} outside histogram range [{lo}, {hi}]")));
        }
        let idx = (((v - lo) / width * bins as f64).floor() as usize).min(bins - 1);
        out[idx].count += 1;
    }
    Ok(out)
}

pub fn write_histogram(bins: &[HistogramBin], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_low", "bin_high", "count"]).map_err(csv_fail)?;
    for b in bins {
        w.write_record([b.low.to_string(), b.high.to_string(), b.count.to_string()])
            .map_err(csv_fail)?;
    }
    write_bytes(path.as_ref(), w)
}

/// Histogram of a quality table over `[0, 1]`.
pub fn export_histogram<S: Scalar>(
    qualities: &crate::dataset::QualityTable<S>,
    bins: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_histogram(&histogram(qualities.values(), bins, 0.0, 1.0)?, path)
}

pub fn read_histogram(path: impl AsRef<Path>) -> Result<Vec<HistogramBin>> {
    let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(csv_fail)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_fail)?;
        let at = format!("row {}", i + 1);
        out.push(HistogramBin {
            low: crate::dataset::parse_decimal(&row[0], &at)?,
            high: crate::dataset::parse_decimal(&row[1], &at)?,
            count: row[2].parse().map_err(|_| Error::format(&at, "bad count"))?,
        });
    }
    Ok(out)
}
