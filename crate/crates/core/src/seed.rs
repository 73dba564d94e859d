//! Seed derivation.
//!
//! Every random stream in the crate is created from a user-facing 64-bit seed
//! plus a purpose tag (and, where needed, a sub-index such as an epoch number).
//! The derivation hashes the tag with FNV-1a, mixes it with the seed and index
//! through SplitMix64 finalizers, and seeds a ChaCha8 generator with the result.
//! Two streams with different tags never share a state, so adding draws to one
//! component cannot shift the numbers another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tags used throughout the crate. Changing any of these changes results.
pub mod tags {
    pub const MATREC_INIT: &str = "matrec/init";
    pub const MATREC_SHUFFLE: &str = "matrec/shuffle";
    pub const SPLIT: &str = "dataio/split";
    pub const ALS_INIT: &str = "als/init";
    pub const BPR_INIT: &str = "bpr/init";
    pub const BPR_SAMPLE: &str = "bpr/sample";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive a sub-seed for `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(tag)) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_for(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}
