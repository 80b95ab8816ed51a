//! Shared domain types: systems, measures, ensembles, grids and conditional estimates.

pub mod ensemble;
pub mod estimate;
pub mod field;
pub mod gaussian;
pub mod grid;
pub mod system;

pub use ensemble::{EnsembleTrajectory, Snapshot};
pub use estimate::{Binning, ConditionalEstimate, FieldStat, NamedField};
pub use field::{CoefficientField, FieldFn};
pub use gaussian::{validate_covariance, GaussianMeasure, PSD_TOLERANCE};
pub use grid::{Density1D, GridDensity2D, UniformGrid};
pub use system::SlowFastSystem;
