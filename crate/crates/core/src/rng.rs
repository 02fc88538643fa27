//! Deterministic pseudo-random streams.
//!
//! Every source of randomness in this crate (dataset sampling, interface
//! selection, fault injection, per-pair seeds) draws from SplitMix64 so
//! that runs are bit-reproducible across platforms and releases.

/// SplitMix64 finalizer. Maps a 64-bit state to a well-mixed output.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Combines parts into a single well-mixed 64-bit value. Used to derive
/// sub-seeds (per mesh pair, per file attempt) without a shared stream,
/// so draw results do not depend on event interleaving.
pub fn hash_u64s(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        acc = mix(acc ^ p.wrapping_mul(GOLDEN));
    }
    mix(acc)
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be nonzero. Uses the
    /// multiply-shift reduction; bias is negligible for the ranges used here.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Maps a 64-bit value to [0, 1). Companion to [`hash_u64s`] for keyed
/// Bernoulli draws.
pub fn unit_f64(v: u64) -> f64 {
    (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
