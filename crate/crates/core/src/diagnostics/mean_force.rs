//! The projected drift of a reversible system is the mean force
//! `d/dx log int exp(-V(x, y)) dy`.

use crate::error::{invalid, Error, Result};
use crate::model::UniformGrid;
use crate::systems::Potential;

/// Trapezoid quadrature over `y` and the step of the centered difference in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub y: UniformGrid,
    pub fd_step: f64,
}

impl QuadratureConfig {
    pub fn new(y_min: f64, y_max: f64, n: usize, fd_step: f64) -> Result<Self> {
        if !(fd_step > 0.0) {
            return invalid("finite-difference step must be positive");
        }
        Ok(Self { y: UniformGrid::new(y_min, y_max, n)?, fd_step })
    }
}

/// Integrand values below this fraction of the peak at the window ends
/// count as covered.
const COVERAGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanForceReport {
    pub xs: Vec<f64>,
    /// Conditional average of `-dV/dx` under `exp(-V(x, .))`.
    pub projected_drift: Vec<f64>,
    /// Centered difference of `log rho_bar`.
    pub log_marginal_slope: Vec<f64>,
    pub sup_discrepancy: f64,
}

/// `log int exp(-V(x, y)) dy`, shifted by the minimum of `V` to avoid underflow.
fn log_marginal(v: &Potential, x: f64, q: &QuadratureConfig) -> Result<f64> {
    let vals: Vec<f64> = q.y.points().iter().map(|&y| v.value(x, y)).collect();
    let vmin = vals.iter().fold(f64::INFINITY, |m, a| m.min(*a));
    if !vmin.is_finite() {
        return Err(Error::QuadratureUnderflow { x });
    }
    let w: Vec<f64> = vals.iter().map(|a| (vmin - a).exp()).collect();
    let z = q.y.trapz(&w);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::QuadratureUnderflow { x });
    }
    if w[0].max(w[w.len() - 1]) > COVERAGE {
        return invalid(format!("quadrature window does not cover the conditional mass at x = {x}"));
    }
    Ok(z.ln() - vmin)
}

fn projected_drift(v: &Potential, x: f64, q: &QuadratureConfig) -> Result<f64> {
    let pts = q.y.points();
    let vals: Vec<f64> = pts.iter().map(|&y| v.value(x, y)).collect();
    let vmin = vals.iter().fold(f64::INFINITY, |m, a| m.min(*a));
    if !vmin.is_finite() {
        return Err(Error::QuadratureUnderflow { x });
    }
    let w: Vec<f64> = vals.iter().map(|a| (vmin - a).exp()).collect();
    let fw: Vec<f64> = pts.iter().zip(&w).map(|(&y, wi)| -v.dx(x, y) * wi).collect();
    let z = q.y.trapz(&w);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::QuadratureUnderflow { x });
    }
    Ok(q.y.trapz(&fw) / z)
}

/// Sup over `xs` of `|f_P(x) - d/dx log rho_bar(x)|`.
pub fn check_mean_force(v: &Potential, xs: &[f64], q: &QuadratureConfig) -> Result<MeanForceReport> {
    let h = q.fd_step;
    let mut report = MeanForceReport { xs: xs.to_vec(), projected_drift: Vec::new(), log_marginal_slope: Vec::new(), sup_discrepancy: 0.0 };
    for &x in xs {
        let fp = projected_drift(v, x, q)?;
        let slope = (log_marginal(v, x + h, q)? - log_marginal(v, x - h, q)?) / (2.0 * h);
        report.sup_discrepancy = report.sup_discrepancy.max((fp - slope).abs());
        report.projected_drift.push(fp);
        report.log_marginal_slope.push(slope);
    }
    Ok(report)
}
