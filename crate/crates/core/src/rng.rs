//! Seed streams.
//!
//! Every random stream in a run is derived from the root seed and a path of
//! integer tags (`sweep`, stream kind, ranker, period, replication, ...). The
//! derivation folds each tag into a SplitMix64 state, so a stream depends only
//! on its logical position in the computation and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream kinds used as the second tag of a derivation path.
pub mod stream {
    pub const LATENT: u64 = 1;
    pub const INITIAL: u64 = 2;
    pub const REGRESSION: u64 = 3;
    pub const FORECAST: u64 = 4;
    pub const REPLICATION: u64 = 5;
    pub const SIMULATION: u64 = 6;
    pub const RANKER_FIT: u64 = 7;
    pub const LEVEL: u64 = 8;
    pub const WINDOW: u64 = 9;
    pub const STUDY: u64 = 10;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(root), |acc, &tag| splitmix(acc ^ splitmix(tag)))
}

pub fn derive_rng(root: u64, path: &[u64]) -> ChainRng {
    ChainRng::seed_from_u64(derive_seed(root, path))
}
