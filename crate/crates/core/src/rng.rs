//! Deterministic substream derivation.
//!
//! Every random draw in the harness comes from a named substream derived from
//! one experiment seed. Substreams keyed by (user, day, session) make paired
//! runs comparable: two arms with the same seed see identical candidate pools
//! and identical page-view randomness, so any divergence is attributable to
//! the policy.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a stable, platform-independent mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, one mix round per part.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut acc = mix64(seed);
    for &p in parts {
        acc = mix64(acc ^ p);
    }
    acc
}

/// A ChaCha8 stream for the given seed and key parts.
pub fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

/// Stable label hashes for naming substreams.
pub mod stream {
    pub const WORLD: u64 = 0x574f524c44;
    pub const ACTIVITY: u64 = 0x414354495645;
    pub const HOUR: u64 = 0x484f5552;
    pub const POOL: u64 = 0x504f4f4c;
    pub const VIEW: u64 = 0x56494557;
    pub const TRAIN: u64 = 0x5452414494e;
    pub const BOOTSTRAP: u64 = 0x424f4f54;
}
