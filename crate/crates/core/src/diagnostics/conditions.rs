//! Grid audits of the regularity conditions behind the mimicking
//! reduction: ellipticity, a Lyapunov function, the 1-D obtuse-angle
//! condition and convergence of the coefficients in time.

use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::coarse_grain::ReducedModel;
use crate::error::{invalid, Result};
use crate::model::{SlowFastSystem, UniformGrid};

/// Slack on the obtuse-angle inequality that absorbs finite-difference error.
pub const OBTUSE_SLACK: f64 = 1e-8;
/// Smallest eigenvalue counted as strictly positive in the ellipticity audit.
pub const ELLIPTICITY_FLOOR: f64 = 1e-12;

/// Uniform ellipticity of a scalar reduced model over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    /// Infimum over the grid of the smallest eigenvalue of `S S^T`.
    pub min_eigenvalue: f64,
    pub at_t: f64,
    pub at_x: f64,
    pub holds: bool,
}

/// Grid infimum of the smallest eigenvalue of the reduced noise covariance.
pub fn audit_ellipticity(model: &ReducedModel, times: &[f64], xs: &UniformGrid) -> Result<EllipticityReport> {
    if model.dim() != 1 {
        return invalid("ellipticity audit runs on scalar reduced models");
    }
    let mut best = EllipticityReport { min_eigenvalue: f64::INFINITY, at_t: f64::NAN, at_x: f64::NAN, holds: false };
    for &t in times {
        for x in xs.points() {
            let s = model.diffusion(t, &[x])?;
            let cov = &s * s.transpose();
            let lam = SymmetricEigen::new(cov).eigenvalues.min();
            if lam < best.min_eigenvalue {
                best = EllipticityReport { min_eigenvalue: lam, at_t: t, at_x: x, holds: false };
            }
        }
    }
    best.holds = best.min_eigenvalue > ELLIPTICITY_FLOOR;
    Ok(best)
}

/// Outcome of the 1-D obtuse-angle check `d_x b(t, x) <= -lambda0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObtuseAngleReport {
    pub lambda0: f64,
    pub sup_derivative: f64,
    pub at_t: f64,
    pub at_x: f64,
    pub holds: bool,
}

/// Centered-difference `d_x b` over the `(t, x)` grid; holds iff its
/// supremum is at most `-lambda0` (up to [`OBTUSE_SLACK`]).
pub fn check_obtuse_angle_1d(
    drift: &dyn Fn(f64, f64) -> Result<f64>,
    times: &[f64],
    xs: &UniformGrid,
    lambda0: f64,
) -> Result<ObtuseAngleReport> {
    let mut rep = ObtuseAngleReport { lambda0, sup_derivative: f64::NEG_INFINITY, at_t: f64::NAN, at_x: f64::NAN, holds: false };
    for &t in times {
        for x in xs.points() {
            let h = 1e-5 * x.abs().max(1.0);
            let db = (drift(t, x + h)? - drift(t, x - h)?) / (2.0 * h);
            if db > rep.sup_derivative {
                rep.sup_derivative = db;
                rep.at_t = t;
                rep.at_x = x;
            }
        }
    }
    rep.holds = rep.sup_derivative <= -lambda0 + OBTUSE_SLACK;
    Ok(rep)
}

type DriftEval = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type TraceEval = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Drift and noise-covariance trace of a time-homogeneous generator,
/// enough to apply it to `phi(x) = 1 + |x|^2`.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    drift: Arc<DriftEval>,
    trace: Arc<TraceEval>,
}

impl Generator {
    /// `trace` is the trace of `sigma sigma^T` at `x`.
    pub fn new<D, T>(dim: usize, drift: D, trace: T) -> Self
    where
        D: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        T: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, drift: Arc::new(drift), trace: Arc::new(trace) }
    }

    /// Generator of the full slow-fast system including time-scale factors.
    pub fn of_system(system: &SlowFastSystem) -> Self {
        let (d, m) = (system.slow_dim(), system.fast_dim());
        let sys = system.clone();
        let sys2 = system.clone();
        Self::new(
            d + m,
            move |z, out| {
                let (f, g) = sys.full_drift(&z[..d], &z[d..]);
                out[..d].copy_from_slice(f.as_slice());
                out[d..].copy_from_slice(g.as_slice());
            },
            move |z| {
                let (a11, _, a22) = sys2.generator_diffusion(&z[..d], &z[d..]);
                2.0 * (a11.trace() + a22.trace())
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L phi = 2 b . x + tr(sigma sigma^T)` for `phi = 1 + |x|^2`.
    pub fn apply_quadratic(&self, x: &[f64]) -> f64 {
        let mut b = vec![0.0; self.dim];
        (self.drift)(x, &mut b);
        2.0 * b.iter().zip(x).map(|(bi, xi)| bi * xi).sum::<f64>() + (self.trace)(x)
    }
}

/// Lyapunov-function audit on `[-L, L]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    pub c2: f64,
    pub half_width: f64,
    /// Smallest `c1 >= 0` with `L phi <= c1 - c2 phi` on the grid.
    pub c1: f64,
    /// The same on the grid of doubled extent.
    pub c1_doubled: f64,
    /// `c1` does not grow when the window doubles.
    pub holds: bool,
}

fn sup_over_cube(generator: &Generator, c2: f64, half_width: f64, n: usize) -> Result<f64> {
    let g = UniformGrid::new(-half_width, half_width, n)?;
    let dim = generator.dim();
    let total = n.pow(dim as u32);
    let mut sup = f64::NEG_INFINITY;
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut rem = idx;
        for xi in x.iter_mut() {
            *xi = g.point(rem % n);
            rem /= n;
        }
        let phi = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        sup = sup.max(generator.apply_quadratic(&x) + c2 * phi);
    }
    Ok(sup)
}

/// Evaluates `sup (L phi + c2 phi)` on `n` points per axis over the window
/// and over the window of twice the extent (`2n - 1` points per axis).
pub fn check_lyapunov_condition(generator: &Generator, c2: f64, half_width: f64, n: usize) -> Result<LyapunovReport> {
    if !(1..=2).contains(&generator.dim()) {
        return invalid("Lyapunov audit runs in one or two dimensions");
    }
    if !(c2 > 0.0) || !(half_width > 0.0) {
        return invalid("c2 and the window half-width must be positive");
    }
    let c1 = sup_over_cube(generator, c2, half_width, n)?.max(0.0);
    let c1_doubled = sup_over_cube(generator, c2, 2.0 * half_width, 2 * n - 1)?.max(0.0);
    let holds = c1.is_finite() && c1_doubled <= c1 * (1.0 + 1e-9) + 1e-12;
    Ok(LyapunovReport { c2, half_width, c1, c1_doubled, holds })
}

/// Convergence of time-dependent reduced coefficients to a limit model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientLimitReport {
    pub t_half: f64,
    pub t_end: f64,
    pub sup_at_half: f64,
    pub sup_at_end: f64,
    pub tol: f64,
    pub holds: bool,
}

/// Sup-norm drift distance between `model` at `T/2` and `T` and the
/// autonomous `limit`, over `xs`.
pub fn audit_coefficient_limits(model: &ReducedModel, limit: &ReducedModel, t_end: f64, xs: &[f64], tol: f64) -> Result<CoefficientLimitReport> {
    let sup_at = |t: f64| -> Result<f64> {
        let mut s = 0.0f64;
        for &x in xs {
            let a = model.drift(t, &[x])?[0];
            let b = limit.drift(t, &[x])?[0];
            s = s.max((a - b).abs());
        }
        Ok(s)
    };
    let (sup_at_half, sup_at_end) = (sup_at(0.5 * t_end)?, sup_at(t_end)?);
    Ok(CoefficientLimitReport { t_half: 0.5 * t_end, t_end, sup_at_half, sup_at_end, tol, holds: sup_at_end <= tol })
}
