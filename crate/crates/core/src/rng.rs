//! Seeded, platform-independent random streams.
//!
//! All randomness goes through ChaCha8. A stream is identified by a seed and a
//! stream index, so independent consumers (instance synthesis, per-iteration
//! noise, randomized coordinate selection) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for `seed`, positioned at the start of stream `stream`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive sub-seeds from structured keys.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from a parent seed and an ordered list of keys.
pub fn derive_seed(parent: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(parent), |acc, &k| mix64(acc ^ mix64(k)))
}
