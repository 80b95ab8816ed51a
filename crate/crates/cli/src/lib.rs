//! Experiment driver: parameter schemas, runs, verdicts and the files each
//! run leaves behind.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiments;
pub mod verdict;

pub use error::{CliError, Result};
pub use experiments::{run_with, Experiment, Outcome};
