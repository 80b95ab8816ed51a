//! Stationarity criteria that separate averaging from projection, and
//! audits of the regularity conditions of the reduced models.

pub mod adjoint;
pub mod conditions;
pub mod mean_force;
pub mod sweep;

pub use adjoint::{
    adjoint_1d, check_prop41, check_solvability, fp_adjoint, fp_adjoint_parts, AdjointParts, Decay, GridField2D, Norms,
    Prop41Norms, Prop41Report, Prop41Verdict, SolvabilityReport, NON_DECAY_FRACTION, SECOND_ORDER_RANGE,
};
pub use conditions::{
    audit_coefficient_limits, audit_ellipticity, check_lyapunov_condition, check_obtuse_angle_1d, CoefficientLimitReport,
    EllipticityReport, Generator, LyapunovReport, ObtuseAngleReport, ELLIPTICITY_FLOOR, OBTUSE_SLACK,
};
pub use mean_force::{check_mean_force, MeanForceReport, QuadratureConfig};
pub use sweep::{ecd_epsilon_sweep, ecd_gaussian, frozen_stationary_law, moment_distance, ConditionalSource, SweepReport, SweepRow};
