//! Simulation library for a dual-element (Rb/Cs) optical tweezer array.
//!
//! The crate is split along the physical pipeline:
//!
//! * [`geometry`]: trap-site layouts for both elements.
//! * [`holography`]: SLM phase-mask synthesis (weighted Gerchberg-Saxton,
//!   Zernike correction, closed-loop homogenization).
//! * [`aod`]: crossed-AOD tone planning and amplitude feedback.
//! * [`dynamics`]: stochastic loading, losses, thermometry and Stark-shift
//!   probes.
//! * [`imaging`]: fluorescence frame synthesis and threshold detection.
//! * [`stats`]: loading/loss estimators and exact binomial intervals.
//! * [`sequencer`]: experiment sequences and continuous-mode operation.
//!
//! Every stochastic routine takes an explicit RNG so that runs are
//! reproducible from a seed; [`rng_from_seed`] is the canonical constructor.

pub mod aod;
pub mod config;
pub mod dynamics;
pub mod element;
pub mod error;
pub mod geometry;
pub mod holography;
pub mod imaging;
pub mod pgm;
pub mod sequencer;
pub mod stats;

pub use element::{Element, PerElement};
pub use error::{Error, Result};

/// RNG used throughout the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
