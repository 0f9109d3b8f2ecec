//! Reproducible random streams.
//!
//! Paths are grouped into batches of [`BATCH`] consecutive indices. Batch `j`
//! draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `j + 1`,
//! so results do not depend on the number of worker threads. Stream 0 is left
//! for non-path draws such as bootstrap resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BATCH: usize = 2048;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    stream_rng(seed, batch as u64 + 1)
}

/// Index ranges of the batches covering `0..n`.
pub fn batches(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(BATCH)).map(|b| b * BATCH..((b + 1) * BATCH).min(n)).collect()
}

/// Runs `work` once per batch in parallel and returns the results in batch
/// order.
pub fn map_batches<R, F>(n: usize, seed: u64, work: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut ChaCha8Rng, std::ops::Range<usize>) -> R + Sync,
{
    batches(n)
        .into_par_iter()
        .enumerate()
        .map(|(b, range)| {
            let mut rng = batch_rng(seed, b);
            work(&mut rng, range)
        })
        .collect()
}
