//! Downlink beamforming for a TMA-driven transmissive RIS transceiver.
//!
//! The crate is organised around the signal chain:
//!
//! * [`system`]: UPA steering vectors, Rician channel synthesis, the stacked
//!   index-vector SINR model, per-element power and MMSE pilot estimation.
//! * [`tma`]: mapping composite beamformed symbols onto 1-bit time-modulated
//!   control waveforms and recovering them from the first harmonic.
//! * [`admm`]: the consensus-ADMM max-min SINR solver and its closed-form
//!   block updates.
//! * [`oracles`]: independent references used to validate the solver.
//!
//! All randomness flows through explicitly passed [`rand_chacha::ChaCha8Rng`]
//! states so every result is reproducible from a seed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod system;
pub mod tma;

pub use admm::{solve, AdmmState, MultiplierMode, SolveOutcome, SolveTrace, SolverOptions};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use system::{ChannelSet, SystemConfig, UserGeometry};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The seeded generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
