use crate::{seed, Scalar};

/// Whether a forward pass samples a dropout subnetwork.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutPlan {
    Off,
    /// Masks derived from this seed; replaying the seed replays the subnetwork.
    Stochastic(u64),
}

/// Keep decision for one unit: `PRF(seed, layer, unit) < 1 - p`.
pub fn keep_unit(seed: u64, layer: usize, unit: usize, p: f64) -> bool {
    let bits = seed::derive2(seed ^ seed::STREAM_DROPOUT, layer as u64, unit as u64);
    seed::unit_f64(bits) < 1.0 - p
}

pub(super) fn scale<S: Scalar>(p: f64) -> S {
    S::of(1.0 / (1.0 - p))
}

/// Inverted dropout: survivors are scaled by `1/(1-p)`, so `Off` is the identity.
pub(super) fn apply<S: Scalar>(h: &[S], plan: DropoutPlan, layer: usize, p: f64) -> (Vec<S>, Option<Vec<bool>>) {
    match plan {
        DropoutPlan::Off => (h.to_vec(), None),
        DropoutPlan::Stochastic(seed) => {
            let mask: Vec<bool> = (0..h.len()).map(|u| keep_unit(seed, layer, u, p)).collect();
            let k = scale::<S>(p);
            let out = h
                .iter()
                .zip(&mask)
                .map(|(&v, &keep)| if keep { v * k } else { S::zero() })
                .collect();
            (out, Some(mask))
        }
    }
}
