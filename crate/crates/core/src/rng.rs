//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, replication, step)`, so serial and parallel
//! runs consume identical randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per step; a single step never consumes more.
const WORDS_PER_STEP: u128 = 1 << 20;

pub fn stream(seed: u64, replication: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    rng
}
