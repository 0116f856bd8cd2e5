//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed plus a stream index, so that
//! replicates can run in any order (or in parallel) and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for drawing experiment parameters, distinct from the
/// per-replicate streams `0..replicates`.
pub const PARAM_STREAM: u64 = u64::MAX;

/// Stream reserved for held-out evaluation data.
pub const HOLDOUT_STREAM: u64 = u64::MAX - 1;
