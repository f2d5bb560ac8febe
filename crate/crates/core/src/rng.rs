//! Seeded random streams.
//!
//! Every consumer of randomness takes an explicit generator derived from a
//! user seed plus a fixed stream id, so that adding draws to one consumer
//! never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for the independent consumers of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EvalSplit = 0,
    TrainUniform = 1,
    BiasCoins = 2,
    Init = 3,
    Dropout = 4,
    Synthetic = 5,
}

pub fn seeded(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
