//! Ready-made systems used by the worked examples and the experiments.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{CoefficientField, SlowFastSystem};

type ScalarFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A potential `V(x, y)` on the plane with its partial derivatives.
#[derive(Clone)]
pub struct Potential {
    name: String,
    value: Arc<ScalarFn>,
    dx: Arc<ScalarFn>,
    dy: Arc<ScalarFn>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("name", &self.name).finish()
    }
}

impl Potential {
    pub fn new<V, Dx, Dy>(name: impl Into<String>, value: V, dx: Dx, dy: Dy) -> Self
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dy: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), value: Arc::new(value), dx: Arc::new(dx), dy: Arc::new(dy) }
    }

    /// `V = a x^2 / 2 + b y^2 / 2 + c x y`.
    pub fn quadratic(a: f64, b: f64, c: f64) -> Self {
        Self::new(
            format!("quadratic({a},{b},{c})"),
            move |x, y| 0.5 * a * x * x + 0.5 * b * y * y + c * x * y,
            move |x, y| a * x + c * y,
            move |x, y| b * y + c * x,
        )
    }

    /// `V = x^2/2 + y^2/2 + xy/2`, the default for the non-reversible examples.
    pub fn default_coupled() -> Self {
        Self::quadratic(1.0, 1.0, 0.5)
    }

    /// `V = x^2/2 + (y - x)^2/2`.
    pub fn shifted_well() -> Self {
        Self::new("shifted_well", |x, y| 0.5 * x * x + 0.5 * (y - x) * (y - x), |x, y| 2.0 * x - y, |x, y| y - x)
    }

    /// `V = x^4/4 + (y - x^2)^2/2`.
    pub fn quartic_channel() -> Self {
        Self::new(
            "quartic_channel",
            |x, y| 0.25 * x.powi(4) + 0.5 * (y - x * x).powi(2),
            |x, y| x.powi(3) - 2.0 * x * (y - x * x),
            |x, y| y - x * x,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        (self.value)(x, y)
    }

    pub fn dx(&self, x: f64, y: f64) -> f64 {
        (self.dx)(x, y)
    }

    pub fn dy(&self, x: f64, y: f64) -> f64 {
        (self.dy)(x, y)
    }

    /// Unnormalized Gibbs density `exp(-V)`.
    pub fn gibbs(&self, x: f64, y: f64) -> f64 {
        (-self.value(x, y)).exp()
    }
}

fn linear(slope: &[f64], x_dim: usize) -> CoefficientField {
    CoefficientField::affine(&DMatrix::from_row_slice(1, slope.len(), slope), &DVector::zeros(1), x_dim)
        .expect("shapes are fixed")
}

/// `dX = (-X + Y) dt`, `dY = -Y/eps dt + sqrt(2/eps) dW`.
pub fn ou_counterexample(eps: f64) -> Result<SlowFastSystem> {
    SlowFastSystem::new(
        linear(&[-1.0, 1.0], 1),
        linear(&[0.0, -1.0], 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )?
    .with_scale(eps)
}

/// As [`ou_counterexample`] with additional slow noise `sqrt(2) dU`.
pub fn ou_noisy_slow(eps: f64) -> Result<SlowFastSystem> {
    SlowFastSystem::new(
        linear(&[-1.0, 1.0], 1),
        linear(&[0.0, -1.0], 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )?
    .with_scale(eps)
}

/// The planar system with hypoelliptic noise on `Y` only, without time-scale separation.
pub fn planar_ou() -> SlowFastSystem {
    SlowFastSystem::new(
        linear(&[-1.0, 1.0], 1),
        linear(&[0.0, -1.0], 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )
    .expect("constant coefficients are valid")
}

fn planar_drift(p: &Potential, fx: impl Fn(&Potential, f64, f64) -> f64 + Send + Sync + 'static) -> CoefficientField {
    let p = p.clone();
    CoefficientField::function(1, 1, 1, 1, move |_, x, y, out| out[0] = fx(&p, x[0], y[0]))
}

fn with_drifts(f: CoefficientField, g: CoefficientField) -> SlowFastSystem {
    SlowFastSystem::new(
        f,
        g,
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )
    .expect("scalar fields are valid")
}

/// Reversible system `dZ = -grad V dt + sqrt(2) dB`; `exp(-V)` is invariant.
pub fn gradient_system(v: &Potential) -> SlowFastSystem {
    with_drifts(planar_drift(v, |p, x, y| -p.dx(x, y)), planar_drift(v, |p, x, y| -p.dy(x, y)))
}

/// Block anti-symmetric perturbation `dZ = (J - I) grad V dt + sqrt(2) dB`
/// with `J = diag(J1, J2)`. On the plane both blocks are 1x1 and hence
/// zero, so this is the gradient system.
pub fn j_block_system(v: &Potential) -> SlowFastSystem {
    gradient_system(v)
}

/// Symplectic perturbation `dX = (dV/dy - dV/dx) dt + sqrt(2) dU`,
/// `dY = (-dV/dx - dV/dy) dt + sqrt(2) dW`. `exp(-V)` stays invariant for
/// the joint dynamics but is not invariant for the frozen fast process.
pub fn symplectic_system(v: &Potential) -> SlowFastSystem {
    with_drifts(
        planar_drift(v, |p, x, y| p.dy(x, y) - p.dx(x, y)),
        planar_drift(v, |p, x, y| -p.dx(x, y) - p.dy(x, y)),
    )
}
