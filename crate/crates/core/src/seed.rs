//! Deterministic seed derivation. Every random stream in the crate is a
//! ChaCha8 generator keyed by a base seed and a small tuple of stream labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(base: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(base), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng(base: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, labels))
}

// Stream labels.
pub const CONTEXTS: u64 = 1;
pub const TEMPLATES: u64 = 2;
pub const SPLIT: u64 = 3;
pub const SHARED_INIT: u64 = 10;
pub const ADAPTER_INIT: u64 = 11;
pub const TABLE_INIT: u64 = 12;
pub const PRIOR_INIT: u64 = 13;
pub const PRETRAIN: u64 = 20;
pub const EPOCH: u64 = 21;
pub const DROPOUT: u64 = 22;
pub const EQ_RANDOM: u64 = 23;
pub const TRIAL: u64 = 30;
