//! Boson-sampling output probabilities for partially distinguishable photons.
//!
//! The crate evaluates the multi-permanent expansion of a detection
//! probability, truncates it at a maximal number of mutually interfering
//! photons, and quantifies the resulting error:
//!
//! - [`combinat`]: permutations by fixed-point count, rencontres numbers,
//!   elementary symmetric means.
//! - [`linalg`]: complex matrices and exact permanent kernels (naive, Ryser,
//!   Glynn), Hadamard-product permanents and their Laplace split.
//! - [`randgen`]: seeded Haar unitaries, Gaussian matrices, visibility vectors.
//! - [`distinguishability`]: overlap-matrix models.
//! - [`probability`]: exact, per-order and truncated probabilities.
//! - [`bounds`]: L1 error bounds, variance predictions, frontier curves and
//!   Monte-Carlo validation.
//! - [`sampler`]: Metropolis sampling from the truncated distribution.
//! - [`cli`]: configuration and command dispatch for the `bosonsim` binary.

pub mod bounds;
pub mod cli;
pub mod combinat;
pub mod distinguishability;
mod error;
pub mod linalg;
pub mod probability;
pub mod randgen;
pub mod sampler;

pub use error::{Error, Result};
pub use linalg::{Complex64, ComplexMatrix};
