//! Seed derivation. Every consumer of randomness gets its own ChaCha stream
//! so that adding draws in one subsystem never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u64)]
pub enum Stream {
    Deploy = 1,
    Movement = 2,
    Policy = 3,
    Translation = 4,
    Loss = 5,
    Jitter = 6,
    Thaw = 7,
    Failure = 8,
    Baseline = 9,
    Fixture = 10,
    Placement = 11,
    Noise = 12,
    Replacement = 13,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
