//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is derived from one base seed and a
//! short path of counters (replication index, MNO index, ...), so streams are
//! independent of evaluation order and of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of counters.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(base), |acc, &c| mix64(acc ^ mix64(c)))
}

pub fn rng_from(base: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(base, path))
}

/// Stream labels, so that e.g. the topology of replication 3 never shares a
/// stream with the chain of replication 3.
pub mod stream {
    pub const TOPOLOGY: u64 = 1;
    pub const CHAIN: u64 = 2;
    pub const MNO_RATE: u64 = 3;
    pub const KNAPSACK: u64 = 4;
    pub const EVAL: u64 = 5;
}
