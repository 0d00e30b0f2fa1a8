//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! keyed from a base seed and a stream label so that folds, cells and
//! models never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

pub fn rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, stream))
}
