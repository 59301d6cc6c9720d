//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`. ChaCha output is specified independently of
//! platform and word size, so a seed reproduces the same stream everywhere.
//!
//! Independent sub-streams (one per class during training, one per test
//! sample and per measurement during noisy evaluation) are keyed with
//! [`derive_seed`], which feeds `seed ^ ((index + 1) * GOLDEN)` through the
//! SplitMix64 finalizer. Nesting `derive_seed` calls gives hierarchical
//! streams: `derive_seed(derive_seed(seed, sample), k)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of sub-stream `index` from a parent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
