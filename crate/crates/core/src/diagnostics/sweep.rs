//! Distance between the equilibrium conditional law and the frozen fast
//! law as the time-scale parameter shrinks.

use nalgebra::DVector;

use crate::coarse_grain::estimate_ecd;
use crate::error::{invalid, Error, Result};
use crate::integrate::{run_particles, FrozenSystem, InitialCondition, IntegratorConfig};
use crate::linear_gaussian::{gaussian_condition, solve_lyapunov, LinearSde};
use crate::model::{Binning, GaussianMeasure, SlowFastSystem};
use crate::stats::loglog_slope;

/// Stationary law of the frozen fast process at `x` for a linear-Gaussian
/// system: mean `-G_y^{-1} G_x x`, covariance from the fast Lyapunov equation.
pub fn frozen_stationary_law(system: &SlowFastSystem, x: &[f64]) -> Result<GaussianMeasure> {
    let (d, m) = (system.slow_dim(), system.fast_dim());
    let (slope, offset) = system
        .fast_drift()
        .affine_parts()
        .ok_or_else(|| Error::InvalidInput("frozen law in closed form needs an affine fast drift".into()))?;
    let beta = system
        .fast_diffusion()
        .constant_value()
        .ok_or_else(|| Error::InvalidInput("frozen law in closed form needs constant fast noise".into()))?;
    let gx = slope.columns(0, d).into_owned();
    let gy = slope.columns(d, m).into_owned();
    let cov = solve_lyapunov(&gy, &beta)?;
    let rhs = -(gx * DVector::from_column_slice(x) + offset);
    let mean = gy.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("fast drift matrix is singular".into()))?;
    GaussianMeasure::new(mean, cov)
}

/// Equilibrium conditional law of `y` given `x` for a linear-Gaussian system.
pub fn ecd_gaussian(system: &SlowFastSystem, x: &[f64]) -> Result<GaussianMeasure> {
    let lin = LinearSde::from_system(system)?;
    let cov = solve_lyapunov(lin.a(), lin.c())?;
    let joint = GaussianMeasure::new(DVector::zeros(lin.dim()), cov)?;
    gaussian_condition(&joint, system.slow_dim(), x)
}

/// Where the two conditional laws come from.
#[derive(Debug, Clone)]
pub enum ConditionalSource {
    /// Closed forms via the Lyapunov equation (linear-Gaussian systems).
    Analytic,
    /// Binned full-system ensemble against time averages of the frozen process.
    MonteCarlo {
        init: InitialCondition,
        cfg: IntegratorConfig,
        frozen_init: InitialCondition,
        frozen_cfg: IntegratorConfig,
        binning: Binning,
    },
}

/// One row of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub ecd_mean: f64,
    pub ecd_var: f64,
    pub frozen_mean: f64,
    pub frozen_var: f64,
    /// `|delta mean| + |delta variance|`.
    pub distance: f64,
    /// Zero for closed-form laws.
    pub distance_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub x: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares log-log slope of distance against `eps`; `None` with
    /// fewer than two values or a vanishing distance.
    pub slope: Option<f64>,
}

fn frozen_moments(system: &SlowFastSystem, x: f64, init: &InitialCondition, cfg: &IntegratorConfig) -> Result<(f64, f64, f64, f64)> {
    let frozen = FrozenSystem::new(system, &[x])?;
    let burn = cfg.burn_in_steps();
    let sums = run_particles(
        &frozen,
        init,
        cfg,
        |_| (0.0, 0.0, 0usize),
        |acc: &mut (f64, f64, usize), s, _, y| {
            if s >= burn && (s - burn).is_multiple_of(cfg.record_every) {
                acc.0 += y[0];
                acc.1 += y[0] * y[0];
                acc.2 += 1;
            }
        },
    )?;
    let means: Vec<f64> = sums.iter().map(|s| s.0 / s.2 as f64).collect();
    let seconds: Vec<f64> = sums.iter().map(|s| s.1 / s.2 as f64).collect();
    let (m, m_se) = crate::stats::mean_se(&means);
    let (s2, s2_se) = crate::stats::mean_se(&seconds);
    // var = E y^2 - (E y)^2; first-order error propagation
    let var = s2 - m * m;
    let var_se = (s2_se * s2_se + 4.0 * m * m * m_se * m_se).sqrt();
    Ok((m, m_se, var, var_se))
}

/// Distances `d(rho_eps(.|x), rho^(x))` for each `eps` of a family of
/// systems with scalar slow and fast variables.
pub fn ecd_epsilon_sweep(
    family: &dyn Fn(f64) -> Result<SlowFastSystem>,
    x: f64,
    eps_list: &[f64],
    source: &ConditionalSource,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return invalid("empty list of scale parameters");
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let system = family(eps)?;
        if system.slow_dim() != 1 || system.fast_dim() != 1 {
            return invalid("the sweep compares scalar conditional laws");
        }
        let row = match source {
            ConditionalSource::Analytic => {
                let ecd = ecd_gaussian(&system, &[x])?;
                let frozen = frozen_stationary_law(&system, &[x])?;
                let (em, ev) = (ecd.mean()[0], ecd.cov()[(0, 0)]);
                let (fm, fv) = (frozen.mean()[0], frozen.cov()[(0, 0)]);
                SweepRow { eps, ecd_mean: em, ecd_var: ev, frozen_mean: fm, frozen_var: fv, distance: (em - fm).abs() + (ev - fv).abs(), distance_se: 0.0 }
            }
            ConditionalSource::MonteCarlo { init, cfg, frozen_init, frozen_cfg, binning } => {
                let est = estimate_ecd(&system, init, cfg, binning)?;
                let bin = est.bin_of(x).filter(|&b| est.is_usable(b)).ok_or(Error::UnusableBin {
                    x,
                    count: est.bin_of(x).map_or(0, |b| est.count(b)),
                    nearest: est.nearest_usable(x),
                })?;
                let (em, em_se) = (est.mean_y(bin)[0], est.se_mean_y(bin)[0]);
                let ev = est.cov_y(bin)[0];
                let ev_se = ev * (2.0 / (est.count(bin) as f64 - 1.0)).sqrt();
                let (fm, fm_se, fv, fv_se) = frozen_moments(&system, x, frozen_init, frozen_cfg)?;
                let se = (em_se * em_se + ev_se * ev_se + fm_se * fm_se + fv_se * fv_se).sqrt();
                SweepRow { eps, ecd_mean: em, ecd_var: ev, frozen_mean: fm, frozen_var: fv, distance: (em - fm).abs() + (ev - fv).abs(), distance_se: se }
            }
        };
        rows.push(row);
    }
    let slope = (rows.len() >= 2 && rows.iter().all(|r| r.distance > 0.0)).then(|| {
        let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
        loglog_slope(&e, &d)
    });
    Ok(SweepReport { x, rows, slope })
}

/// Covariance distance helper for multi-dimensional Gaussian laws:
/// `sum |delta mean_i| + sum |delta cov_ij|`.
pub fn moment_distance(a: &GaussianMeasure, b: &GaussianMeasure) -> f64 {
    let dm: f64 = (a.mean() - b.mean()).abs().sum();
    let dc: f64 = (a.cov() - b.cov()).abs().sum();
    dm + dc
}
