//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator whose seed is a
//! SplitMix64 hash of a master seed and a path of integers, e.g.
//! `(master, replication, stage)` or `(master, iteration, sample)`. Streams
//! therefore never depend on scheduling or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with a path of stream identifiers.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stage identifiers used in seed paths.
pub mod stage {
    pub const SIMULATE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INJECT: u64 = 3;
    pub const FIT: u64 = 4;
    pub const PREDICT: u64 = 5;
    pub const MH: u64 = 6;
    pub const LOGLIK: u64 = 7;
}
