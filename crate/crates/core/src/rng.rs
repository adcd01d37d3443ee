//! Deterministic derivation of every random stream in the crate.
//!
//! All randomness comes from `ChaCha8Rng` keyed by a single master seed and
//! separated by stream id. The id space is partitioned so that workers,
//! Monte-Carlo samples, and evaluation draws can never collide:
//!
//! * streams `0..N` belong to the `N` workers of a training pool;
//! * Monte-Carlo sample `i` owns the block starting at `(i + 1) << 32`;
//! * evaluation-time randomness (test-loss initial states) uses the block
//!   at `1 << 63`.
//!
//! Results are therefore reproducible and independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for evaluation-time randomness, disjoint from every worker
/// and Monte-Carlo block.
pub const EVAL_STREAM: u64 = 1 << 63;

/// First stream id owned by Monte-Carlo sample `sample_index`. Each sample
/// gets a block of `1 << 32` ids for the workers it constructs.
pub fn sample_stream_base(sample_index: usize) -> u64 {
    (sample_index as u64 + 1) << 32
}

/// A generator positioned at the start of `stream` under `master_seed`.
pub fn substream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
