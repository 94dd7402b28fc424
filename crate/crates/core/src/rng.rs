//! Seeded random streams.
//!
//! Every random draw in the crate goes through a [`ChaCha8Rng`] obtained from
//! here. Streams are addressed by `(seed, stream)` so that work items can be
//! processed in any order, or in parallel, without changing their draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn master(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for a `(generation, item)` coordinate.
pub fn stream(seed: u64, generation: u64, item: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << 32) ^ item);
    rng
}

pub mod purpose {
    //! Reserved item ids for streams that are not tied to one individual.
    pub const INIT: u64 = u64::MAX >> 32;
    pub const PAIRING: u64 = (u64::MAX >> 32) - 1;
    pub const SELECTION: u64 = (u64::MAX >> 32) - 2;
}
