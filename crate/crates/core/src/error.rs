use thiserror::Error;

/// Errors raised by the coarse-graining workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate density: total mass {mass}")]
    DegenerateDensity { mass: f64 },

    #[error("vanishing marginal at x = {x}: marginal density {marginal:e}")]
    VanishingMarginal { x: f64, marginal: f64 },

    #[error("non-finite state for particle {particle} at t = {time} (step {step})")]
    NonFinite {
        particle: usize,
        time: f64,
        step: usize,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("no stationary covariance: drift matrix is not Hurwitz (max real eigenvalue {max_real})")]
    NoStationaryCovariance { max_real: f64 },

    #[error("degenerate conditioning: condition number {condition:e}")]
    DegenerateConditioning { condition: f64 },

    #[error("singular at origin: phi(t) diverges as t -> 0 for deterministic slow initial data")]
    SingularAtOrigin,

    #[error("insufficient coverage: {usable} usable bins, at least {required} required")]
    InsufficientCoverage { usable: usize, required: usize },

    #[error("unusable bin at x = {x} (count {count}); nearest usable bin center: {nearest:?}")]
    UnusableBin {
        x: f64,
        count: usize,
        nearest: Option<f64>,
    },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not symmetric: asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("grid too coarse: {nx} x {ny} points, need at least 9 in each direction")]
    GridTooCoarse { nx: usize, ny: usize },

    #[error("quadrature underflow at x = {x}")]
    QuadratureUnderflow { x: f64 },

    #[error("t = {t} lies outside the model time domain [{start}, {end}]")]
    OutsideTimeDomain { t: f64, start: f64, end: f64 },

    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
