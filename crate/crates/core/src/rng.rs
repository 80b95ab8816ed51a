//! Per-particle random streams keyed by `(seed, particle)`.
//!
//! Every particle owns two ChaCha8 streams: an even one for its initial
//! state and an odd one for its Brownian increments. Results therefore do
//! not depend on how particles are scheduled across threads, and two runs
//! sharing a seed share their noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_LAYOUT: &str = "chacha8(seed); stream 2p: initial state, stream 2p+1: increments";

pub fn initial_stream(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * particle as u64);
    rng
}

pub fn noise_stream(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * particle as u64 + 1);
    rng
}
