//! Reproducible randomness.
//!
//! Every stochastic operation in this crate draws from xoshiro256**
//! seeded through splitmix64. Work units (a trial, a query, a sampled
//! subset) get their own derived substream, so results are identical
//! no matter how the work is scheduled across threads.

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

/// Label namespaces; keeps substreams of unrelated operations disjoint
/// even when their numeric labels collide.
pub mod domain {
    pub const SINGLE_RANDOM: u64 = 0x5e1e_c701;
    pub const INCREMENTAL: u64 = 0x5e1e_c702;
    pub const POOL_MC: u64 = 0x5e1e_c703;
    pub const SYNTH_EVIDENCE: u64 = 0x5e1e_c704;
    pub const SYNTH_POOL: u64 = 0x5e1e_c705;
    pub const SYNTH_SCORES: u64 = 0x5e1e_c706;
    pub const SYNTH_META: u64 = 0x5e1e_c707;
    pub const SYNTH_BASE: u64 = 0x5e1e_c708;
}

/// splitmix64 state update + output mix (Vigna's reference constants).
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit sub-seed from a base seed and a label path by folding
/// each label through splitmix64.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &label in labels {
        state = out ^ label;
        out = splitmix64(&mut state);
    }
    out
}

/// A substream for one work unit. `seed_from_u64` expands the sub-seed
/// into xoshiro state via splitmix64.
pub fn stream(seed: u64, labels: &[u64]) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(derive_seed(seed, labels))
}

/// A fresh seed from OS entropy, for callers that did not pin one.
pub fn entropy_seed() -> u64 {
    rand::random()
}
