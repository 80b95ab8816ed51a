use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coarse_grain::matrix_sqrt_psd;
use crate::coarse_grain::reduced::BinTable;
use crate::error::{invalid, Error, Result};
use crate::integrate::{run_particles, FrozenSystem, FullSystem, InitialCondition, IntegratorConfig};
use crate::model::{validate_covariance, Binning, ConditionalEstimate, Density1D, GaussianMeasure, NamedField, SlowFastSystem, Snapshot};
use crate::stats::{gauss_hermite, mean_se};

/// Names of the per-bin fields attached by [`conditional_statistics`].
pub const DRIFT_FIELD: &str = "drift";
pub const DIFFUSION_FIELD: &str = "diffusion";

/// Reduced drift and diffusion matrix at one slow state.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoefficients {
    pub x: Vec<f64>,
    pub drift: Vec<f64>,
    pub drift_se: Vec<f64>,
    /// Averaged `alpha alpha^T + alpha12 alpha12^T` (symmetric PSD).
    pub diffusion: DMatrix<f64>,
    pub diffusion_se: DMatrix<f64>,
}

impl LocalCoefficients {
    /// Symmetric PSD noise matrix of the reduced equation.
    pub fn diffusion_root(&self) -> Result<DMatrix<f64>> {
        matrix_sqrt_psd(&self.diffusion)
    }
}

struct TimeAverage {
    f_sum: Vec<f64>,
    a_sum: Vec<f64>,
    count: usize,
    f_buf: Vec<f64>,
    a_buf: Vec<f64>,
    scratch: Vec<f64>,
}

/// Averaged coefficients at `x`: ergodic time averages of the slow drift
/// and slow diffusion matrix along frozen fast paths after the burn-in.
/// Each particle contributes one time average; standard errors are the
/// spread of those averages over `sqrt(N)`.
pub fn average_coefficients(system: &SlowFastSystem, x: &[f64], init_y: &InitialCondition, cfg: &IntegratorConfig) -> Result<LocalCoefficients> {
    let frozen = FrozenSystem::new(system, x)?;
    let (d, m) = (system.slow_dim(), system.fast_dim());
    let f = system.slow_drift();
    let f_random = f.is_y_dependent();
    let a_random = system.slow_diffusion().is_y_dependent() || system.cross_diffusion().is_some_and(|c| c.is_y_dependent());
    let burn = cfg.burn_in_steps();
    let stride = cfg.record_every;
    let y0 = vec![0.0; m];

    let accs = run_particles(
        &frozen,
        init_y,
        cfg,
        |_| TimeAverage {
            f_sum: vec![0.0; d],
            a_sum: vec![0.0; d * d],
            count: 0,
            f_buf: vec![0.0; d],
            a_buf: vec![0.0; d * d],
            scratch: vec![0.0; d * d.max(m)],
        },
        |acc: &mut TimeAverage, s, t, y| {
            if s < burn || !(s - burn).is_multiple_of(stride) {
                return;
            }
            acc.count += 1;
            if f_random {
                f.eval_into(t, x, y, &mut acc.f_buf);
                acc.f_sum.iter_mut().zip(&acc.f_buf).for_each(|(a, v)| *a += v);
            }
            if a_random {
                acc.a_buf.iter_mut().for_each(|v| *v = 0.0);
                system.slow_diffusion().add_outer_into(t, x, y, &mut acc.a_buf, &mut acc.scratch);
                if let Some(c) = system.cross_diffusion() {
                    c.add_outer_into(t, x, y, &mut acc.a_buf, &mut acc.scratch);
                }
                acc.a_sum.iter_mut().zip(&acc.a_buf).for_each(|(a, v)| *a += v);
            }
        },
    )?;
    if accs.iter().any(|a| a.count == 0) {
        return invalid("no samples after burn-in");
    }
    let n = accs.len() as f64;
    let moments = |pick: &dyn Fn(&TimeAverage) -> f64| {
        let vals: Vec<f64> = accs.iter().map(|a| pick(a) / a.count as f64).collect();
        let (mu, se) = mean_se(&vals);
        (mu, if n > 1.0 { se } else { f64::NAN })
    };

    let (drift, drift_se): (Vec<f64>, Vec<f64>) = if f_random {
        (0..d).map(|i| moments(&|a| a.f_sum[i])).unzip()
    } else {
        (f.eval_vector(0.0, x, &y0).iter().copied().collect(), vec![0.0; d])
    };
    let (diffusion, diffusion_se) = if a_random {
        let pairs: Vec<(f64, f64)> = (0..d * d).map(|k| moments(&|a| a.a_sum[k])).collect();
        (
            DMatrix::from_row_iterator(d, d, pairs.iter().map(|p| p.0)),
            DMatrix::from_row_iterator(d, d, pairs.iter().map(|p| p.1)),
        )
    } else {
        (system.slow_diffusion_matrix(x, &y0), DMatrix::zeros(d, d))
    };
    if drift.iter().chain(diffusion.iter()).any(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFiniteValue("averaged coefficient".into()));
    }
    let diffusion = validate_covariance(&((&diffusion + diffusion.transpose()) * 0.5))?;
    Ok(LocalCoefficients { x: x.to_vec(), drift, drift_se, diffusion, diffusion_se })
}

/// Bins `(x, y)` samples of a scalar-slow system and attaches the per-bin
/// averages of the slow drift and slow diffusion matrix, evaluated at the
/// bin center and the sampled `y`.
pub fn conditional_statistics(system: &SlowFastSystem, xs: &[f64], ys: &[f64], binning: &Binning) -> Result<ConditionalEstimate> {
    if system.slow_dim() != 1 {
        return invalid("conditional statistics need a scalar slow variable");
    }
    let m = system.fast_dim();
    let drift = |xc: f64, y: &[f64], out: &mut [f64]| system.slow_drift().eval_into(0.0, &[xc], y, out);
    let diffusion = |xc: f64, y: &[f64], out: &mut [f64]| {
        let mut scratch = vec![0.0; m.max(1)];
        out[0] = 0.0;
        system.slow_diffusion().add_outer_into(0.0, &[xc], y, out, &mut scratch);
        if let Some(c) = system.cross_diffusion() {
            c.add_outer_into(0.0, &[xc], y, out, &mut scratch);
        }
    };
    ConditionalEstimate::from_samples(
        xs,
        ys,
        m,
        binning,
        &[
            NamedField { name: DRIFT_FIELD, dim: 1, eval: &drift },
            NamedField { name: DIFFUSION_FIELD, dim: 1, eval: &diffusion },
        ],
    )
}

/// Splits a snapshot of `(x, y)` states into slow and fast columns.
pub fn split_snapshot(snapshot: &Snapshot, d: usize) -> (Vec<f64>, Vec<f64>) {
    let m = snapshot.dim() - d;
    let mut xs = Vec::with_capacity(snapshot.len() * d);
    let mut ys = Vec::with_capacity(snapshot.len() * m);
    for r in snapshot.rows() {
        xs.extend_from_slice(&r[..d]);
        ys.extend_from_slice(&r[d..]);
    }
    (xs, ys)
}

/// Equilibrium conditional statistics: the full system is simulated and
/// states after the burn-in (every `record_every` steps, pooled over
/// particles) are binned by `x`.
pub fn estimate_ecd(system: &SlowFastSystem, init: &InitialCondition, cfg: &IntegratorConfig, binning: &Binning) -> Result<ConditionalEstimate> {
    if system.slow_dim() != 1 {
        return invalid("equilibrium conditional estimates need a scalar slow variable");
    }
    let burn = cfg.burn_in_steps();
    let stride = cfg.record_every;
    let samples = run_particles(
        &FullSystem::new(system),
        init,
        cfg,
        |_| Vec::new(),
        |acc: &mut Vec<f64>, s, _, z| {
            if s >= burn && (s - burn).is_multiple_of(stride) {
                acc.extend_from_slice(z);
            }
        },
    )?;
    let n: usize = samples.iter().map(|s| s.len()).sum::<usize>() / (1 + system.fast_dim());
    let snapshot = Snapshot::new(n, 1 + system.fast_dim(), samples.concat())?;
    let (xs, ys) = split_snapshot(&snapshot, 1);
    let est = conditional_statistics(system, &xs, &ys, binning)?;
    if est.n_usable() < 3 {
        return Err(Error::InsufficientCoverage { usable: est.n_usable(), required: 3 });
    }
    Ok(est)
}

/// Conditional law of `y` given `x` used by the projection.
pub enum ConditionalLaw<'a> {
    /// Binned Monte Carlo estimate (scalar slow variable).
    Binned(&'a ConditionalEstimate),
    /// Gaussian law of `y` at the requested `x`.
    Gaussian(GaussianMeasure),
    /// Gridded density of scalar `y` at the requested `x`.
    Density(&'a Density1D),
}

const HERMITE_NODES: usize = 24;

/// Projected coefficients: averages of the slow drift and slow diffusion
/// matrix against the conditional law of `y` at `x`.
pub fn project_coefficients(system: &SlowFastSystem, law: &ConditionalLaw<'_>, x: &[f64]) -> Result<LocalCoefficients> {
    let (d, m) = (system.slow_dim(), system.fast_dim());
    if x.len() != d {
        return Err(Error::Dimension { what: "slow state", expected: d, got: x.len() });
    }
    let mut f_buf = vec![0.0; d];
    let mut a_buf = vec![0.0; d * d];
    let mut scratch = vec![0.0; d * d.max(m)];
    let mut point = |y: &[f64], f_out: &mut [f64], a_out: &mut [f64]| {
        system.slow_drift().eval_into(0.0, x, y, &mut f_buf);
        a_buf.iter_mut().for_each(|v| *v = 0.0);
        system.slow_diffusion().add_outer_into(0.0, x, y, &mut a_buf, &mut scratch);
        if let Some(c) = system.cross_diffusion() {
            c.add_outer_into(0.0, x, y, &mut a_buf, &mut scratch);
        }
        f_out.copy_from_slice(&f_buf);
        a_out.copy_from_slice(&a_buf);
    };

    let (drift, drift_se, diffusion, diffusion_se) = match law {
        ConditionalLaw::Binned(est) => {
            if d != 1 {
                return invalid("binned conditional laws need a scalar slow variable");
            }
            let bin = est.bin_of(x[0]);
            match bin {
                Some(b) if est.is_usable(b) => {
                    let f = est.field(DRIFT_FIELD).ok_or_else(|| Error::InvalidInput("estimate lacks drift field".into()))?;
                    let a = est
                        .field(DIFFUSION_FIELD)
                        .ok_or_else(|| Error::InvalidInput("estimate lacks diffusion field".into()))?;
                    (f.at(b).to_vec(), f.se_at(b).to_vec(), DMatrix::from_row_slice(1, 1, a.at(b)), DMatrix::from_row_slice(1, 1, a.se_at(b)))
                }
                _ => {
                    return Err(Error::UnusableBin {
                        x: x[0],
                        count: bin.map_or(0, |b| est.count(b)),
                        nearest: est.nearest_usable(x[0]),
                    })
                }
            }
        }
        ConditionalLaw::Gaussian(g) => {
            if g.dim() != m {
                return Err(Error::Dimension { what: "conditional law", expected: m, got: g.dim() });
            }
            if m > 3 {
                return invalid("tensor Gauss-Hermite quadrature is limited to three fast dimensions");
            }
            let (nodes, weights) = gauss_hermite(HERMITE_NODES);
            let eig = SymmetricEigen::new(g.cov().clone());
            let factor = DMatrix::from_fn(m, m, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt());
            let total = HERMITE_NODES.pow(m as u32);
            let mut f_acc = vec![0.0; d];
            let mut a_acc = vec![0.0; d * d];
            let (mut f_pt, mut a_pt) = (vec![0.0; d], vec![0.0; d * d]);
            for idx in 0..total {
                let mut rem = idx;
                let mut z = DVector::zeros(m);
                let mut w = 1.0;
                for j in 0..m {
                    let q = rem % HERMITE_NODES;
                    rem /= HERMITE_NODES;
                    z[j] = nodes[q];
                    w *= weights[q];
                }
                let y = g.mean() + &factor * z;
                point(y.as_slice(), &mut f_pt, &mut a_pt);
                f_acc.iter_mut().zip(&f_pt).for_each(|(a, v)| *a += w * v);
                a_acc.iter_mut().zip(&a_pt).for_each(|(a, v)| *a += w * v);
            }
            (f_acc, vec![0.0; d], DMatrix::from_row_slice(d, d, &a_acc), DMatrix::zeros(d, d))
        }
        ConditionalLaw::Density(rho) => {
            if m != 1 {
                return invalid("gridded conditional densities need a scalar fast variable");
            }
            let grid = *rho.grid();
            let mut f_vals = vec![vec![0.0; grid.len()]; d];
            let mut a_vals = vec![vec![0.0; grid.len()]; d * d];
            let (mut f_pt, mut a_pt) = (vec![0.0; d], vec![0.0; d * d]);
            for (j, p) in rho.values().iter().enumerate() {
                point(&[grid.point(j)], &mut f_pt, &mut a_pt);
                for i in 0..d {
                    f_vals[i][j] = p * f_pt[i];
                }
                for k in 0..d * d {
                    a_vals[k][j] = p * a_pt[k];
                }
            }
            let mass = rho.mass();
            let drift = f_vals.iter().map(|v| grid.trapz(v) / mass).collect();
            let a: Vec<f64> = a_vals.iter().map(|v| grid.trapz(v) / mass).collect();
            (drift, vec![0.0; d], DMatrix::from_row_slice(d, d, &a), DMatrix::zeros(d, d))
        }
    };
    let diffusion = validate_covariance(&((&diffusion + diffusion.transpose()) * 0.5))?;
    Ok(LocalCoefficients { x: x.to_vec(), drift, drift_se, diffusion, diffusion_se })
}

/// Mimicking coefficients at time `t` from an ensemble snapshot of the full
/// system: per-bin conditional averages of the slow drift and of the slow
/// diffusion matrix (reported through its square root). Sparse bins are
/// flagged, not rejected.
pub fn gyongy_coefficients(system: &SlowFastSystem, t: f64, snapshot: &Snapshot, binning: &Binning) -> Result<BinTable> {
    if system.slow_dim() != 1 {
        return invalid("binned mimicking coefficients need a scalar slow variable");
    }
    if snapshot.dim() != 1 + system.fast_dim() {
        return Err(Error::Dimension { what: "snapshot dimension", expected: 1 + system.fast_dim(), got: snapshot.dim() });
    }
    let (xs, ys) = split_snapshot(snapshot, 1);
    let est = conditional_statistics(system, &xs, &ys, binning)?;
    Ok(bin_table(t, &est))
}

/// Converts a conditional estimate into reduced-model coefficients.
pub fn bin_table(t: f64, est: &ConditionalEstimate) -> BinTable {
    let f = est.field(DRIFT_FIELD).expect("drift field attached");
    let a = est.field(DIFFUSION_FIELD).expect("diffusion field attached");
    let nb = est.n_bins();
    let mut diffusion = vec![0.0; nb];
    let mut diffusion_se = vec![0.0; nb];
    for i in 0..nb {
        let v = a.at(i)[0].max(0.0);
        diffusion[i] = v.sqrt();
        // delta method for the square root
        diffusion_se[i] = if v > 0.0 { a.se_at(i)[0] / (2.0 * v.sqrt()) } else { a.se_at(i)[0].max(0.0) };
    }
    BinTable {
        time: t,
        centers: est.centers(),
        counts: est.counts().to_vec(),
        usable: (0..nb).map(|i| est.is_usable(i)).collect(),
        drift: (0..nb).map(|i| f.at(i)[0]).collect(),
        drift_se: (0..nb).map(|i| f.se_at(i)[0]).collect(),
        diffusion,
        diffusion_se,
    }
}
