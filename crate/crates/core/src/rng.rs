//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed and a domain
//! tag, with the row (or replicate) index selecting the stream. Two
//! streams never share state, so work can be split across threads in
//! any order without changing the draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep the data, mask and grid streams of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Data = 1,
    Mask = 2,
    Grid = 3,
    Replicate = 4,
    Cluster = 5,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a sub-seed, used to give each replicate of an experiment its
/// own base seed.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ index)
}

/// Independent generator for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain as u64).rotate_left(17));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
