//! Stable, platform-independent hashing used for hash embeddings, encoder
//! fingerprints, and per-episode RNG seeding. `std`'s hashers are randomized
//! per process, so reproducible outputs need these instead.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer: a single avalanche step, usable as a counter-based
/// generator by feeding it `base + k`.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a run seed and an ordinal.
pub fn stream_seed(run_seed: u64, ordinal: u64) -> u64 {
    mix64(run_seed ^ mix64(ordinal.wrapping_add(1)))
}
