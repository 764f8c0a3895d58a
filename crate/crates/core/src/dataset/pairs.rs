use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use super::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::{seed, Scalar};

/// Unordered image pair, stored with the lexicographically smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    a: String,
    b: String,
}

impl Pair {
    /// Canonicalizes the order; `None` for a self-pair.
    pub fn new(x: &str, y: &str) -> Option<Pair> {
        match x.cmp(y) {
            std::cmp::Ordering::Less => Some(Pair { a: x.into(), b: y.into() }),
            std::cmp::Ordering::Greater => Some(Pair { a: y.into(), b: x.into() }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> &str {
        &self.a
    }

    pub fn second(&self) -> &str {
        &self.b
    }
}

/// Genuine and impostor comparisons, each sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairProtocol {
    pub genuine: Vec<Pair>,
    pub impostor: Vec<Pair>,
}

impl PairProtocol {
    pub fn is_empty(&self) -> bool {
        self.genuine.is_empty() && self.impostor.is_empty()
    }
}

// Below this many candidates (or when most of them are wanted) the cross pairs
// are enumerated and subsampled; otherwise rejection sampling is cheaper.
const ENUMERATE_LIMIT: u128 = 1 << 20;

/// All intra-identity pairs plus `impostor_count` cross-identity pairs drawn
/// uniformly without replacement (capped at the number available).
pub fn generate_pairs<S: Scalar>(
    dataset: &EmbeddingDataset<S>,
    impostor_count: usize,
    seed: u64,
) -> Result<PairProtocol> {
    if dataset.len() < 2 {
        return Err(Error::invalid("pair generation needs at least two records"));
    }
    if impostor_count > 0 && dataset.identity_count() < 2 {
        return Err(Error::invalid("impostor pairs need at least two identities"));
    }
    let records = dataset.records();

    let mut genuine = Vec::new();
    for positions in dataset.identity_index().values() {
        for (k, &i) in positions.iter().enumerate() {
            for &j in &positions[k + 1..] {
                genuine.extend(Pair::new(&records[i].image_id, &records[j].image_id));
            }
        }
    }
    genuine.sort();

    let n = records.len() as u128;
    let same: u128 = dataset
        .identity_index()
        .values()
        .map(|p| (p.len() as u128) * (p.len() as u128 - 1) / 2)
        .sum();
    let available = n * (n - 1) / 2 - same;
    let want = (impostor_count as u128).min(available) as usize;

    let mut rng = seed::rng(seed);
    let cross = |i: usize, j: usize| records[i].identity != records[j].identity;
    let mut impostor: Vec<Pair> = if want == 0 {
        Vec::new()
    } else if available <= ENUMERATE_LIMIT || want as u128 * 2 >= available {
        let mut all = Vec::with_capacity(available as usize);
        for i in 0..records.len() {
            for j in i + 1..records.len() {
                if cross(i, j) {
                    all.push((i, j));
                }
            }
        }
        index::sample(&mut rng, all.len(), want)
            .into_iter()
            .map(|k| {
                let (i, j) = all[k];
                Pair::new(&records[i].image_id, &records[j].image_id).expect("ids are unique")
            })
            .collect()
    } else {
        let mut picked = BTreeSet::new();
        while picked.len() < want {
            let i = rng.random_range(0..records.len());
            let j = rng.random_range(0..records.len());
            if i != j && cross(i, j) {
                picked.insert(Pair::new(&records[i].image_id, &records[j].image_id).expect("ids are unique"));
            }
        }
        picked.into_iter().collect()
    };
    impostor.sort();

    Ok(PairProtocol { genuine, impostor })
}

/// Reads `kind,image_a,image_b` rows (`kind` is `genuine` or `impostor`) and
/// checks every pair against `dataset`.
pub fn load_pairs<S: Scalar>(path: impl AsRef<Path>, dataset: &EmbeddingDataset<S>) -> Result<PairProtocol> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format("header", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["kind", "image_a", "image_b"] {
        return Err(Error::format("header", "expected `kind,image_a,image_b`"));
    }
    let mut genuine = BTreeSet::new();
    let mut impostor = BTreeSet::new();
    for (i, row) in rdr.records().enumerate() {
        let at = format!("row {}", i + 1);
        let row = row.map_err(|e| Error::format(&at, e.to_string()))?;
        let (x, y) = (&row[1], &row[2]);
        let rx = dataset.get(x).ok_or_else(|| Error::UnknownId(x.to_string()))?;
        let ry = dataset.get(y).ok_or_else(|| Error::UnknownId(y.to_string()))?;
        let pair = Pair::new(x, y).ok_or_else(|| Error::format(&at, "self-pair"))?;
        let same = rx.identity == ry.identity;
        let set = match (&row[0], same) {
            ("genuine", true) => &mut genuine,
            ("impostor", false) => &mut impostor,
            ("genuine", false) | ("impostor", true) => {
                return Err(Error::format(&at, format!("`{}` contradicts the identities of {x} and {y}", &row[0])))
            }
            (other, _) => return Err(Error::format(&at, format!("unknown pair kind `{other}`"))),
        };
        if !set.insert(pair) {
            return Err(Error::format(&at, "duplicate pair"));
        }
    }
    Ok(PairProtocol {
        genuine: genuine.into_iter().collect(),
        impostor: impostor.into_iter().collect(),
    })
}

pub fn save_pairs(protocol: &PairProtocol, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::format("csv", e.to_string());
    w.write_record(["kind", "image_a", "image_b"]).map_err(fail)?;
    for p in &protocol.genuine {
        w.write_record(["genuine", p.first(), p.second()]).map_err(fail)?;
    }
    for p in &protocol.impostor {
        w.write_record(["impostor", p.first(), p.second()]).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
