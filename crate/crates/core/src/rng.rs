//! Counter-based pseudo-random numbers.
//!
//! SplitMix64 evaluated in counter mode: draw `i` of a stream is the
//! SplitMix64 finalizer applied to `key + i * GOLDEN`. Positioning is O(1),
//! so a replication plan can hand run `r` its own substream without
//! sequential skipping, and every draw is a pure function of
//! `(seed, stream index, draw index)`. Reproducibility of all Monte Carlo
//! artifacts reduces to recording one 64-bit seed.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer (the murmur-style 64-bit avalanche).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic uniform stream, cheap to fork by (seed, stream index).
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Root stream of a seed. Equivalent to `substream(seed, 0)`.
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent substream, e.g. one per replication index. Distinct
    /// indices under the same seed give distinct keys (the derivation is a
    /// composition of bijections in `index`).
    pub fn substream(seed: u64, index: u64) -> Self {
        let key = mix64(mix64(seed).wrapping_add(mix64(index ^ GOLDEN)));
        CounterRng { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let z = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        self.counter = self.counter.wrapping_add(1);
        mix64(z)
    }

    /// Uniform draw in the open interval (0, 1): 2^53 equispaced values
    /// offset half a step from both endpoints, so 0.0 and 1.0 never occur.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Number of draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}
