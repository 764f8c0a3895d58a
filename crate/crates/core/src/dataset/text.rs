//! CSV encodings for embeddings (`image_id,identity,v0,...`) and quality tables
//! (`image_id,quality`).

use std::io::Read;
use std::path::Path;

use super::{EmbeddingDataset, EmbeddingRecord, QualityTable};
use crate::error::{Error, Result};
use crate::Scalar;

fn csv_err(e: csv::Error) -> Error {
    let at = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "csv".to_string());
    Error::format(at, e.to_string())
}

pub fn parse_decimal<S: Scalar>(field: &str, at: &str) -> Result<S> {
    let v: S = field
        .trim()
        .parse()
        .map_err(|_| Error::format(at, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite(at.to_string()));
    }
    Ok(v)
}

pub(super) fn read_embeddings_csv<S: Scalar, R: Read>(reader: R) -> Result<EmbeddingDataset<S>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::format("header", "missing header"))?
        .map_err(csv_err)?;
    if header.len() < 3 || &header[0] != "image_id" || &header[1] != "identity" {
        return Err(Error::format(
            "header",
            "expected `image_id,identity,v0,...,v{D-1}`",
        ));
    }
    let dim = header.len() - 2;
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("v{k}") {
            return Err(Error::format("header", format!("column {} should be `v{k}`, found `{name}`", k + 3)));
        }
    }

    let mut ds = EmbeddingDataset::new(dim)?;
    for (i, row) in rows.enumerate() {
        let row = row.map_err(csv_err)?;
        let at = format!("row {}", i + 1);
        if row.len() != dim + 2 {
            return Err(Error::format(
                &at,
                format!("dimension mismatch: expected {dim} values, found {}", row.len().saturating_sub(2)),
            ));
        }
        let vector = row
            .iter()
            .skip(2)
            .map(|f| parse_decimal::<S>(f, &at))
            .collect::<Result<Vec<_>>>()?;
        ds.push(EmbeddingRecord::new(&row[0], &row[1], vector))
            .map_err(|e| Error::format(&at, e.to_string()))?;
    }
    Ok(ds)
}

pub(super) fn write_embeddings_csv<S: Scalar>(ds: &EmbeddingDataset<S>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["image_id".to_string(), "identity".to_string()];
    header.extend((0..ds.dim()).map(|k| format!("v{k}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut fields = Vec::with_capacity(ds.dim() + 2);
    for r in ds.records() {
        fields.clear();
        fields.push(r.image_id.clone());
        fields.push(r.identity.clone());
        // Display on floats prints the shortest decimal that parses back exactly.
        fields.extend(r.vector.iter().map(|v| v.to_string()));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::format("csv", e.to_string()))
}

pub fn load_quality_table<S: Scalar>(path: impl AsRef<Path>) -> Result<QualityTable<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_quality_csv(std::io::BufReader::new(file))
}

pub(crate) fn read_quality_csv<S: Scalar, R: Read>(reader: R) -> Result<QualityTable<S>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::format("header", "missing header"))?
        .map_err(csv_err)?;
    if header.len() != 2 || &header[0] != "image_id" || &header[1] != "quality" {
        return Err(Error::format("header", "expected `image_id,quality`"));
    }
    let mut table = QualityTable::new();
    for (i, row) in rows.enumerate() {
        let row = row.map_err(csv_err)?;
        let at = format!("row {}", i + 1);
        let q = parse_decimal::<S>(&row[1], &at)?;
        table.insert(&row[0], q).map_err(|e| match e {
            Error::DuplicateId(id) => Error::format(&at, format!("duplicate image id `{id}`")),
            other => other,
        })?;
    }
    Ok(table)
}

/// Writes rows in image-id order.
pub fn save_quality_table<S: Scalar>(table: &QualityTable<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image_id", "quality"]).map_err(csv_err)?;
    for (id, q) in table.iter() {
        w.write_record([id, &q.to_string()]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
