//! Pathwise integration and local times for Gaussian processes.
//!
//! The crate is organised bottom-up: sampled paths and covariance models,
//! fractional calculus on grids, the two pathwise integrals, convex payoffs,
//! local times, and the change-of-variable checks built from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex_fn;
pub mod crossing;
pub mod error;
pub mod frac_calc;
pub mod gaussian_paths;
pub mod hedging;
pub mod integrators;
pub mod local_time;
pub mod numeric;
pub mod path;
pub mod tanaka;

pub use error::{Error, Result};
pub use path::{BracketPath, SampledPath, TimeGrid};

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
