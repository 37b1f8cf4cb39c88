//! Seeded randomness.
//!
//! Every random decision in the crate is drawn from [`ChaCha8Rng`], seeded
//! from a single user-supplied `u64`. Independent consumers (one algorithm,
//! one household, one tree) get their own ChaCha stream via
//! [`stream_rng`], so results do not depend on scheduling order and are
//! identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as Rng;

/// Stream ids reserved for top-level consumers.
pub mod streams {
    pub const KMEANS: u64 = 1;
    pub const FUZZY: u64 = 2;
    pub const SOM: u64 = 3;
    pub const HIER: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const PAM: u64 = 6;
    /// Base for per-household synthetic generation (`SYNTH_BASE + index`).
    pub const SYNTH_BASE: u64 = 1 << 32;
    /// Base for per-tree random forest streams (`TREE_BASE + tree index`).
    pub const TREE_BASE: u64 = 1 << 40;
}

/// A generator for `seed` positioned on ChaCha stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
