//! Counter-based random streams.
//!
//! Every consumer of randomness derives its generator from an explicit seed
//! plus a tuple of counters (epoch, sample position, ...), so parallel or
//! reordered consumers never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator keyed by `seed` and up to three counters.
pub fn stream(seed: u64, counters: &[u64]) -> StreamRng {
    assert!(counters.len() <= 3, "at most three stream counters");
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, c) in counters.iter().enumerate() {
        key[8 * (i + 1)..8 * (i + 2)].copy_from_slice(&c.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
