//! Deterministic random substream derivation.
//!
//! Every random draw in a simulation comes from a ChaCha stream whose seed is
//! a fixed mix of the master seed and a tag path (run index, slot, purpose,
//! node/link ids). Draws for one purpose are therefore independent of the
//! order in which other purposes consume randomness, and identical
//! configurations reproduce bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose tags for substream derivation. The numeric values are part of the
/// reproducibility contract; do not renumber.
pub mod stream {
    pub const PLACEMENT: u64 = 1;
    pub const PRIOR: u64 = 2;
    pub const MOBILITY: u64 = 3;
    pub const INTERNAL: u64 = 4;
    pub const RANGING: u64 = 5;
    pub const SPAWN_INIT: u64 = 6;
    pub const SPAWN_UPDATE: u64 = 7;
}

/// SplitMix64 finalizer; the standard 64-bit avalanche mix.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a substream seed from the master seed and a tag path by folding
/// each tag through SplitMix64.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    h
}

/// A ChaCha stream for the given tag path under the master seed.
pub fn substream(master: u64, tags: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, tags))
}
