//! Identity-labelled embeddings, verification pair protocols and quality tables.
//!
//! This is the boundary that stands in for a deployed recognition model: whatever
//! produced the embeddings, the rest of the crate only sees [`EmbeddingDataset`].

mod emb1;
mod pairs;
mod text;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

pub use pairs::{generate_pairs, load_pairs, save_pairs, Pair, PairProtocol};
pub use text::{load_quality_table, parse_decimal, save_quality_table};

/// On-disk embedding encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    /// Little-endian binary container with 32-bit floats.
    Emb1,
}

impl Format {
    /// `.csv` means CSV, anything else emb1.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Emb1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord<S> {
    pub image_id: String,
    pub identity: String,
    pub vector: Vec<S>,
}

impl<S: Scalar> EmbeddingRecord<S> {
    pub fn new(image_id: impl Into<String>, identity: impl Into<String>, vector: Vec<S>) -> Self {
        EmbeddingRecord {
            image_id: image_id.into(),
            identity: identity.into(),
            vector,
        }
    }
}

/// Ordered, validated collection of embedding records sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset<S> {
    dim: usize,
    records: Vec<EmbeddingRecord<S>>,
    identity_index: BTreeMap<String, Vec<usize>>,
    id_index: HashMap<String, usize>,
}

impl<S: Scalar> EmbeddingDataset<S> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingDataset {
            dim,
            records: Vec::new(),
            identity_index: BTreeMap::new(),
            id_index: HashMap::new(),
        })
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = EmbeddingRecord<S>>) -> Result<Self> {
        let mut ds = Self::new(dim)?;
        for r in records {
            ds.push(r)?;
        }
        Ok(ds)
    }

    /// Appends a record after checking every dataset invariant.
    pub fn push(&mut self, record: EmbeddingRecord<S>) -> Result<()> {
        if record.image_id.is_empty() {
            return Err(Error::invalid("image id must be non-empty"));
        }
        if record.identity.is_empty() {
            return Err(Error::invalid(format!("identity of `{}` must be non-empty", record.image_id)));
        }
        if record.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: format!("record `{}`", record.image_id),
                expected: self.dim,
                found: record.vector.len(),
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("record `{}`", record.image_id)));
        }
        if self.id_index.contains_key(&record.image_id) {
            return Err(Error::DuplicateId(record.image_id));
        }
        let pos = self.records.len();
        self.id_index.insert(record.image_id.clone(), pos);
        self.identity_index
            .entry(record.identity.clone())
            .or_default()
            .push(pos);
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord<S>] {
        &self.records
    }

    pub fn get(&self, image_id: &str) -> Option<&EmbeddingRecord<S>> {
        self.id_index.get(image_id).map(|&i| &self.records[i])
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.id_index.get(image_id).copied()
    }

    /// Identity label → record positions, identities in sorted order.
    pub fn identity_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.identity_index
    }

    pub fn identities(&self) -> impl Iterator<Item = &str> {
        self.identity_index.keys().map(String::as_str)
    }

    pub fn identity_count(&self) -> usize {
        self.identity_index.len()
    }

    /// Rebuilds the dataset with every vector replaced by `f(record)`.
    ///
    /// The output dimension may differ from the input one.
    pub fn map_vectors<T: Scalar>(
        &self,
        dim: usize,
        mut f: impl FnMut(&EmbeddingRecord<S>) -> Result<Vec<T>>,
    ) -> Result<EmbeddingDataset<T>> {
        let mut out = EmbeddingDataset::new(dim)?;
        for r in &self.records {
            out.push(EmbeddingRecord::new(r.image_id.clone(), r.identity.clone(), f(r)?))?;
        }
        Ok(out)
    }
}

pub fn load_embeddings<S: Scalar>(path: impl AsRef<Path>, format: Format) -> Result<EmbeddingDataset<S>> {
    let path = path.as_ref();
    match format {
        Format::Csv => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            text::read_embeddings_csv(std::io::BufReader::new(file))
        }
        Format::Emb1 => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            emb1::decode(&bytes)
        }
    }
}

/// Writes a dataset. emb1 narrows every component to `f32`; CSV keeps the
/// shortest decimal that round-trips in `S`.
pub fn save_embeddings<S: Scalar>(dataset: &EmbeddingDataset<S>, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Csv => text::write_embeddings_csv(dataset)?,
        Format::Emb1 => emb1::encode(dataset)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Per-image quality scores keyed by image id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QualityTable<S> {
    entries: BTreeMap<String, S>,
}

impl<S: Scalar> QualityTable<S> {
    pub fn new() -> Self {
        QualityTable {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, image_id: impl Into<String>, quality: S) -> Result<()> {
        let id = image_id.into();
        if !quality.is_finite() {
            return Err(Error::NonFinite(format!("quality of `{id}`")));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.entries.insert(id, quality);
        Ok(())
    }

    pub fn get(&self, image_id: &str) -> Option<S> {
        self.entries.get(image_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in image-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, S)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn values(&self) -> impl Iterator<Item = S> + '_ {
        self.entries.values().copied()
    }

    /// Every image id in the table that is absent from `dataset`.
    pub fn unknown_ids<'a, T: Scalar>(&'a self, dataset: &EmbeddingDataset<T>) -> Vec<&'a str> {
        self.entries
            .keys()
            .filter(|k| dataset.get(k).is_none())
            .map(String::as_str)
            .collect()
    }
}

impl<S: Scalar> FromIterator<(String, S)> for QualityTable<S> {
    /// Later duplicates overwrite earlier ones; use [`QualityTable::insert`] for checked construction.
    fn from_iter<I: IntoIterator<Item = (String, S)>>(iter: I) -> Self {
        QualityTable {
            entries: iter.into_iter().collect(),
        }
    }
}
