//! Deterministic random streams.
//!
//! Every unit of Monte Carlo work owns a ChaCha8 generator whose seed is a
//! pure function of its coordinates, so results never depend on how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `rep` at sample size `n` of a campaign.
pub fn replication_seed(base_seed: u64, n: u64, rep: u64) -> u64 {
    mix64(mix64(mix64(base_seed) ^ n) ^ rep)
}

/// Seed for an arbitrary labelled sub-stream of `base_seed`.
pub fn derive_seed(base_seed: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(mix64(base_seed), |acc, b| mix64(acc ^ u64::from(b)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
