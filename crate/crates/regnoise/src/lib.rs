//! A numerical laboratory for regularization by fractional noise.
//!
//! The crate builds fractional Brownian motion from an explicit Brownian
//! driver through its Volterra kernel, smooths distributional drifts with the
//! Gaussian heat semigroup, solves SDEs and the stochastic heat equation with
//! those drifts, runs generalized couplings with Girsanov/Pinsker bounds, and
//! integrates sewing germs. The [`harness`] module bundles everything into
//! named, reproducible experiment suites.
//!
//! Start from the runnable programs in `examples/`.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod drifts;
pub mod error;
pub mod fbm;
pub mod gaussian;
pub mod harness;
pub mod metrics;
pub mod sde;
pub mod sewing;
pub mod she;

pub use error::{LabError, Result};
