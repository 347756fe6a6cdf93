//! Experiment orchestration: configuration, trajectory sampling, statistics,
//! serialization, and figure-style reproduction runs.

pub mod config;
pub mod emit;
pub mod reproduce;
pub mod stats;
pub mod trajectory;

pub use config::{ExperimentConfig, InitialState, RestartPolicy};
pub use stats::{estimate_suppression, AggregateStats, SuppressionEstimate};
pub use trajectory::{
    classify_convergence, run_trajectories, IterationRecord, Terminal, TrajectoryRecord,
};

use rand_chacha::ChaCha8Rng;

/// Splitmix-style derivation of an independent RNG stream from a master seed
/// and a stream index, so trajectory randomness is independent of scheduling.
pub(crate) fn derive_stream(seed: u64, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
