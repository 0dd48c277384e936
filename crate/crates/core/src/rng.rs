//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a root
//! seed plus a small tuple of stream identifiers, so results never depend on
//! execution order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with stream identifiers into a new 64-bit seed.
pub fn derive_seed(root: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(root), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub fn stream(root: u64, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, ids))
}

/// Stream tags, so that e.g. client 3 and satellite 3 never share a stream.
pub mod tag {
    pub const PARTITION: u64 = 1;
    pub const SENSITIVE: u64 = 2;
    pub const OFFLOAD: u64 = 3;
    pub const CLIENT: u64 = 4;
    pub const SATELLITE: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
    pub const PROFILE: u64 = 8;
    pub const PAIRS: u64 = 9;
    pub const SCHEDULE: u64 = 10;
    pub const ANALYSIS: u64 = 11;
}
