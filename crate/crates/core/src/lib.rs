//! Sample amplification: given `n` i.i.d. draws from an unknown distribution in a
//! known family, produce `n + m` draws whose joint law is close in total variation
//! to `n + m` i.i.d. draws from the same distribution.
//!
//! The crate is organised as:
//!
//! * [`numerics`] — deterministic counter-based RNG, special functions, distribution
//!   CDFs, symmetric-matrix square roots, and elementary samplers;
//! * [`families`] — the distribution families amplifiers operate on, with sampling,
//!   sufficient statistics, and densities;
//! * [`divergences`] — closed-form KL / chi-square / Hellinger / TV computations and
//!   the amplification error bounds built from them;
//! * [`amplify`] — the amplification procedures themselves (sufficiency-based
//!   conditional resampling and learn-then-shuffle);
//! * [`lower_bounds`] — information-theoretic certificates that amplification beyond
//!   a given `m` is impossible;
//! * [`verify`] — Monte-Carlo total-variation estimation and a battery of calibrated
//!   detectors for validating amplifier outputs empirically.

pub mod amplify;
pub mod divergences;
pub mod error;
pub mod families;
pub mod lower_bounds;
pub mod numerics;
pub mod verify;

pub use error::{AmpError, Result};

/// Re-exported so downstream crates build datasets with the same matrix types.
pub use nalgebra;
