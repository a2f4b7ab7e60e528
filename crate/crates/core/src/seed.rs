//! Deterministic seed derivation. Every seeded component draws from its own
//! ChaCha stream keyed by `(seed, tag)` so that adding a component never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer over `seed` and `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

pub(crate) mod tags {
    pub const FEATURE_PATCH: u64 = 1;
    pub const CONTEXT: u64 = 2;
    pub const QUERY: u64 = 3;
    pub const KEY: u64 = 4;
    pub const COST: u64 = 5;
    pub const VALUE: u64 = 6;
    pub const CONFIDENCE_HEAD: u64 = 7;
    pub const GRU: u64 = 8;
    pub const RANDOM_POLICY: u64 = 9;
    pub const BACKGROUND: u64 = 0x100;
    pub const LAYER: u64 = 0x200;
    pub const CORRUPTION: u64 = 0x1000;
    pub const SUITE: u64 = 0x2000;
}
