//! Seeded random source.
//!
//! The stream is ChaCha8 keyed from a 64-bit seed through `SeedableRng::seed_from_u64`
//! (a PCG32-based expansion fixed by `rand_core`). Floats and indices are derived
//! from raw `u64` words with the conversions below, so a seed names the same
//! sequence of draws on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent task spawned from `master`.
///
/// `child = mix64(master ^ mix64(index + golden))`, with `golden` the 64-bit
/// golden-ratio constant.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn child(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard exponential draw, strictly positive.
    pub fn exp1(&mut self) -> f64 {
        -self.open01().ln()
    }

    /// Uniform index in `0..n` (multiply-shift; bias below 2^-64 * n).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over an empty range");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
