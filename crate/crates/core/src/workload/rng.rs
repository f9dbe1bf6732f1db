//! Seeded generator behind every random choice in the workload.
//!
//! The stream is xoshiro256++ seeded through SplitMix64 from a single `u64`
//! (`Xoshiro256PlusPlus::seed_from_u64`). Derived values are computed here,
//! not by a distribution library, so a seed maps to the same workload on
//! every platform and every release:
//!
//! * `next_f64`: the top 53 bits of one output, scaled by `2^-53`.
//! * `below(n)`: the high word of `output * n` (128-bit product).

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Clone, Debug)]
pub struct WorkloadRng(Xoshiro256PlusPlus);

impl WorkloadRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)`. `n` must be non-zero.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Fisher-Yates.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
