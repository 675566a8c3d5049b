//! Deterministic derivation of independent RNG streams from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; any distinct constants work, they only need to stay fixed.
pub const STREAM_INIT: u64 = 0x1;
pub const STREAM_TRAIN: u64 = 0x2;
pub const STREAM_EVAL: u64 = 0x3;
pub const STREAM_SWEEP: u64 = 0x4;
pub const STREAM_FIXTURE: u64 = 0x5;
pub const STREAM_PROBE: u64 = 0x6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` so that distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}
