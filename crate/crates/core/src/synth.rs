//! Synthetic identity clusters with a known per-image degradation.
//!
//! Each identity gets a random unit prototype; each image is the prototype plus
//! isotropic Gaussian noise of a per-image magnitude σ, projected back onto the
//! unit sphere. The ground-truth quality of an image is `-σ`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::{EmbeddingDataset, EmbeddingRecord, QualityTable};
use crate::error::{Error, Result};
use crate::{seed, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_identities: usize,
    pub images_per_identity: usize,
    pub dim: usize,
    pub prototype_seed: u64,
    /// Per-image σ is uniform in `[noise_low, noise_high]`.
    pub noise_low: f64,
    pub noise_high: f64,
    pub noise_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_identities: 10,
            images_per_identity: 10,
            dim: 64,
            prototype_seed: 1,
            noise_low: 0.0,
            noise_high: 0.3,
            noise_seed: 2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_identities == 0 || self.images_per_identity == 0 {
            return Err(Error::invalid("identity and image counts must be positive"));
        }
        if self.dim < 2 {
            return Err(Error::invalid("synthetic embeddings need dim >= 2"));
        }
        if !(self.noise_low >= 0.0 && self.noise_low.is_finite() && self.noise_high.is_finite()) {
            return Err(Error::invalid("noise bounds must be finite and non-negative"));
        }
        if self.noise_low > self.noise_high {
            return Err(Error::invalid(format!(
                "noise_low {} exceeds noise_high {}",
                self.noise_low, self.noise_high
            )));
        }
        Ok(())
    }
}

pub fn identity_label(i: usize) -> String {
    format!("id{i:04}")
}

pub fn image_label(identity: usize, image: usize) -> String {
    format!("id{identity:04}_{image:04}")
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn perturb(base: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let noise = gaussian(rng, base.len());
    let mut v: Vec<f64> = base.iter().zip(&noise).map(|(b, g)| b + sigma * g).collect();
    normalize(&mut v);
    v
}

/// Generates the dataset (identity-major order) and the ground-truth `-σ` table.
pub fn generate<S: Scalar>(spec: &SynthSpec) -> Result<(EmbeddingDataset<S>, QualityTable<S>)> {
    spec.validate()?;
    let mut proto_rng = seed::rng(spec.prototype_seed);
    let prototypes: Vec<Vec<f64>> = (0..spec.n_identities)
        .map(|_| {
            let mut p = gaussian(&mut proto_rng, spec.dim);
            normalize(&mut p);
            p
        })
        .collect();

    let mut ds = EmbeddingDataset::new(spec.dim)?;
    let mut truth = QualityTable::new();
    for (i, proto) in prototypes.iter().enumerate() {
        for j in 0..spec.images_per_identity {
            let index = (i * spec.images_per_identity + j) as u64;
            let mut rng = seed::rng(seed::derive2(spec.noise_seed, seed::STREAM_RECORD, index));
            let sigma = spec.noise_low + (spec.noise_high - spec.noise_low) * rng.random::<f64>();
            let v = if sigma == 0.0 { proto.clone() } else { perturb(proto, sigma, &mut rng) };
            let id = image_label(i, j);
            ds.push(EmbeddingRecord::new(&id, identity_label(i), v.into_iter().map(S::of).collect()))?;
            truth.insert(id, S::of(-sigma))?;
        }
    }
    Ok((ds, truth))
}

/// Re-noises the listed images with an extra σ and re-normalizes them.
pub fn degrade<S: Scalar>(
    dataset: &EmbeddingDataset<S>,
    image_ids: &[&str],
    extra_sigma: f64,
    seed: u64,
) -> Result<EmbeddingDataset<S>> {
    for id in image_ids {
        if dataset.get(id).is_none() {
            return Err(Error::UnknownId(id.to_string()));
        }
    }
    if !(extra_sigma >= 0.0 && extra_sigma.is_finite()) {
        return Err(Error::invalid("extra sigma must be finite and non-negative"));
    }
    if extra_sigma == 0.0 {
        return Ok(dataset.clone());
    }
    let targets: std::collections::HashSet<&str> = image_ids.iter().copied().collect();
    dataset.map_vectors(dataset.dim(), |r| {
        if !targets.contains(r.image_id.as_str()) {
            return Ok(r.vector.clone());
        }
        let mut rng = seed::rng(seed::derive2(seed, seed::STREAM_RECORD, seed::hash_str(&r.image_id)));
        let base: Vec<f64> = r.vector.iter().map(|v| v.to_f64_lossless()).collect();
        Ok(perturb(&base, extra_sigma, &mut rng).into_iter().map(S::of).collect())
    })
}
