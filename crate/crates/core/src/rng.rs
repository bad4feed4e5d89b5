//! Keyed random substreams.
//!
//! Every stochastic decision in a run draws from a ChaCha8 stream keyed by
//! `(seed, epoch, iteration, stream, index)`. A stream never depends on how
//! many values another stream consumed, so evaluation order and thread count
//! cannot change a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate the substreams of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Tournament = 2,
    CrossoverPairing = 3,
    Crossover = 4,
    Switch = 5,
    NGram = 6,
    Transform = 7,
    Elite = 8,
    Incumbent = 9,
    Synth = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(epoch, iteration, stream, index)` slot.
pub fn substream(seed: u64, epoch: u64, iteration: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for part in [epoch, iteration, stream as u64, index] {
        h = splitmix64(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}
