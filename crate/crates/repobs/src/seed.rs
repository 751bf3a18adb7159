//! Deterministic seed derivation.
//!
//! Every random quantity in the crate flows from one root seed. Sub-seeds
//! are derived by a stable hand-rolled mix of (seed, purpose-tag, indices)
//! so that results never depend on worker count or scheduling, and never
//! change across library releases the way `DefaultHasher` output may.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the tag bytes, then SplitMix64 finalization rounds mixing
/// in the seed and each index.
pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    let mut state = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &ix in indices {
        state = splitmix64(state.wrapping_add(ix).wrapping_add(0x9e37_79b9_7f4a_7c15));
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based generator for a derived stream.
pub fn rng_for(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, indices))
}
