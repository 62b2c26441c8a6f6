//! Seeded random streams.
//!
//! Every run owns a [`ChaCha8Rng`]. Independent sub-streams (per trial, per
//! party) are derived from a master seed by selecting the ChaCha stream
//! number: `stream(seed, k)` is the generator seeded with `seed` and switched
//! to stream `k`. Streams never overlap, so results do not depend on the order
//! in which trials execute.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}
