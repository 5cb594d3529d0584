//! Seedable, platform-stable random streams.
//!
//! Every consumer derives its own stream from `(seed, stream)` so that adding
//! draws in one place never shifts the draws seen elsewhere.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Named stream offsets. Particle `i` uses `PARTICLE + i`, and so on.
pub mod streams {
    pub const CLASSIFIER: u64 = 1;
    pub const PARTICLE: u64 = 1 << 16;
    pub const MEMBER_CLASSIFIER: u64 = 2 << 16;
    pub const BATCHES: u64 = 3 << 16;
    pub const DATA: u64 = 4 << 16;
    pub const SPLIT: u64 = 5 << 16;
    pub const SANITY: u64 = 6 << 16;
}

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Independent stream `stream` of generator `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngState::derive(42, 0);
        let mut b = RngState::derive(42, 1);
        let va: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
    }

    #[test]
    fn known_first_draws_are_stable() {
        // pins the generator so a dependency bump that changes streams is noticed
        let mut a = RngState::new(0);
        assert_eq!(a.next_u64(), 13_080_132_717_333_068_652);
        assert_eq!(a.next_u64(), 8_594_738_769_458_413_623);
        assert_eq!(RngState::derive(0, 5).next_u64(), 3_283_172_953_191_924_410);
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = RngState::new(3).permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
