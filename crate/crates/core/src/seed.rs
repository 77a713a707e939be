//! Seed splitting.
//!
//! Every random stream in a run is derived from one 64-bit master seed:
//! `derive(seed, stream, index)` mixes the master seed, a fixed stream tag
//! and an index through SplitMix64, and the result seeds a ChaCha8
//! generator. Streams are independent of each other and of scheduling, so
//! parallel execution cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Environment dynamics (spawns) of training environment `index`.
    TrainEnv = 1,
    /// Action sampling for training environment `index`.
    TrainAction = 2,
    /// Minibatch shuffling; `index` is the update number.
    Shuffle = 3,
    /// Seed base of scenario `index` in a sweep.
    Scenario = 4,
    /// Network initialization.
    Init = 5,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream as u64)).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    rng(derive(seed, stream, index))
}
