//! Counter-based seed derivation.
//!
//! Every random decision in the crate is a pure function of a seed and a small
//! tuple of counters, so results do not depend on iteration order or on how work
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream counter.
pub fn derive(base: u64, stream: u64) -> u64 {
    mix64(mix64(base) ^ stream.wrapping_mul(GOLDEN).rotate_left(17))
}

pub fn derive2(base: u64, a: u64, b: u64) -> u64 {
    derive(derive(base, a), b)
}

/// FNV-1a over the UTF-8 bytes; stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Maps a 64-bit value to a uniform double in `[0, 1)` using the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags keep unrelated uses of one user seed apart.
pub(crate) const STREAM_SHUFFLE: u64 = 0x5348_5546;
pub(crate) const STREAM_DROPOUT: u64 = 0x4452_4f50;
pub(crate) const STREAM_PASS: u64 = 0x5041_5353;
pub(crate) const STREAM_RECORD: u64 = 0x5245_4344;
