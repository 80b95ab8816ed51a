//! Coarse-graining of slow-fast stochastic differential equations.
//!
//! Three reductions of a slow-fast system to its slow variable are provided:
//! averaging against the frozen fast process, projection onto the
//! equilibrium conditional law, and time-dependent mimicking of the
//! one-time marginals. Each can be computed exactly for linear-Gaussian
//! systems and estimated by Monte Carlo in general, and the `diagnostics`
//! module checks the stationarity criteria that tell them apart.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod integrate;
pub mod linear_gaussian;
pub mod rng;
pub mod stats;
pub mod table;
pub mod coarse_grain;
pub mod diagnostics;
pub mod systems;

pub use error::{Error, Result};

/// Version of this library, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
