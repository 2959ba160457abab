//! Seeded randomness shared by every stochastic step of the pipeline.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded via
//! `seed_from_u64`. ChaCha8 output is defined independently of platform
//! endianness and word size, so a seed produces the same stream everywhere.
//! Shuffles use the Fisher–Yates walk in [`shuffle`], which draws
//! `gen_range(0..=i)` for `i` from `n-1` down to `1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> PipelineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut PipelineRng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// A shuffled permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut PipelineRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, rng);
    idx
}
