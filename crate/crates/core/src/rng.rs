//! Seed derivation for reproducible Monte-Carlo runs.
//!
//! Every random stream is a ChaCha8 generator seeded from `(master, run, stream)`
//! through a SplitMix64 mix, so a run's randomness does not depend on how many
//! other runs exist or in which order they execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent purposes within a single Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Gain = 1,
    TrainingInput = 2,
    TrainingNoise = 3,
    TestNoise = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed identifying Monte-Carlo run `run` under `master`.
pub fn run_seed(master: u64, run: u64) -> u64 {
    splitmix64(splitmix64(master) ^ run)
}

pub fn derive_seed(master: u64, run: u64, stream: Stream) -> u64 {
    splitmix64(run_seed(master, run) ^ stream as u64)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
