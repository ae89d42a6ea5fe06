//! Per-trajectory random streams.
//!
//! Trajectory `k` of a batch with base seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`. Streams of one key
//! never overlap, so results do not depend on how trajectories are assigned
//! to workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajRng = ChaCha8Rng;

pub fn stream(base_seed: u64, index: u64) -> TrajRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}
