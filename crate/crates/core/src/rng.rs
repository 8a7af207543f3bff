//! Seeded random number generation.
//!
//! Every random choice in the crate goes through [`seeded_rng`]. Stage seeds
//! are derived from one master seed with [`derive_seed`]: the stage counter is
//! mixed into the master seed and passed through one round of SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stage counters used by the experiment pipeline.
pub mod stage {
    pub const TAXONOMY: u64 = 1;
    pub const MODEL_INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const NONCE_INIT: u64 = 4;
    pub const DIVERSITY: u64 = 5;
    pub const MONOTONICITY: u64 = 6;
    pub const EMERGENT: u64 = 7;
}

/// `splitmix64(master + counter * 0x9E3779B97F4A7C15)`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
