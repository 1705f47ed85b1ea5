//! Engine-wide random number generation.
//!
//! All randomness flows from a ChaCha20 stream keyed by a user seed. Samples
//! drawn in parallel use [`stream_rng`] with their index as stream id, so the
//! result does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type EngineRng = ChaCha20Rng;

/// Identifier recorded in reports and exported bundles.
pub const RNG_ALGORITHM: &str = "chacha20 (rand_chacha 0.9, seed_from_u64)";

pub fn engine_rng(seed: u64) -> EngineRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> EngineRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
