//! Seeded random streams and replicate fan-out.
//!
//! Every stream is a ChaCha8 generator. Replicate `i` of an experiment with
//! base seed `s` uses the seed `derive_seed(s, i)`, a SplitMix64-based mix,
//! so results depend only on `(s, i)` and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The PRNG used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// One SplitMix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream for replicate `index` under `base`.
pub fn replicate_rng(base: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(base, index))
}

/// Runs `f(index, rng)` for `count` replicates in parallel and returns the
/// results ordered by replicate index.
pub fn par_replicates<T, F>(base: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(base, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
