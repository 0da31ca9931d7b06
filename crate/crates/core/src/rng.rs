//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit generator. Independent streams
//! (replicates, DAG draws) are derived from a master seed and a counter, so a
//! result never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream `index` of the family rooted at `master`.
pub fn derived_rng(master: u64, index: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for nesting stream families.
pub fn derived_seed(master: u64, index: u64) -> u64 {
    use rand::RngCore;
    derived_rng(master, index).next_u64()
}
