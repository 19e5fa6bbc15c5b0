//! Deterministic seed derivation.
//!
//! Every parallel work item gets its own ChaCha stream selected by index, so
//! results depend only on the seed and the chunk layout, never on thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Samples per Monte Carlo chunk. Part of the reproducibility contract.
pub const CHUNK: u64 = 2048;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent child seed for work item `index`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    // Offset keeps child seeds off the streams used directly by `stream_rng`.
    stream_rng(seed, index.wrapping_add(1 << 63)).next_u64()
}

/// Splits `samples` into fixed-size chunks: (stream index, chunk length).
pub fn chunks(samples: u64) -> Vec<(u64, u64)> {
    (0..samples.div_ceil(CHUNK))
        .map(|k| (k, CHUNK.min(samples - k * CHUNK)))
        .collect()
}
