//! Finite-volume laboratory for the Fokker-Planck equation
//! `d/dt f = div(grad f + E f)` with a general, possibly non-gradient, force
//! field `E`.
//!
//! The crate assembles a positivity-preserving, mass-conserving discrete
//! generator, checks confinement hypotheses on `E` by sampling, computes the
//! stationary state and the discrete spectral gap, integrates the flow, and
//! measures the splitting `L = A + B` with a cutoff multiplier `B`.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod grid;
pub mod inequalities;
pub mod linalg;
pub mod par;
pub mod probes;
pub mod spectral;
pub mod splitting;

pub use error::{FpkError, Result};
