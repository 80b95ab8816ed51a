//! Exact laws of linear SDEs `dZ = A Z dt + C dW`.
//!
//! Matrix exponentials, stationary covariances from the Lyapunov equation,
//! controllability rank, moment propagation and Gaussian conditioning, plus
//! the closed-form mimicking drift of the planar counterexample
//! `dX = (-X + Y) dt`, `dY = -Y dt + sqrt(2) dW`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::model::gaussian::max_abs;
use crate::model::{GaussianMeasure, SlowFastSystem};

/// Condition numbers above this make conditioning a degeneracy error.
pub const MAX_CONDITION: f64 = 1e12;

/// Linear SDE `dZ = A Z dt + C dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSde {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LinearSde {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension { what: "drift matrix columns", expected: a.nrows(), got: a.ncols() });
        }
        if c.nrows() != a.nrows() {
            return Err(Error::Dimension { what: "noise matrix rows", expected: a.nrows(), got: c.nrows() });
        }
        if a.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("linear SDE coefficient".into()));
        }
        Ok(Self { a, c })
    }

    /// The linear form of a slow-fast system with affine drifts and constant diffusions.
    pub fn from_system(system: &SlowFastSystem) -> Result<Self> {
        let (a, c) = system
            .as_linear()
            .ok_or_else(|| Error::InvalidInput("system is not linear with constant diffusion".into()))?;
        Self::new(a, c)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `C C^T`.
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        &self.c * self.c.transpose()
    }

    /// Largest real part among the eigenvalues of `A`.
    pub fn max_real_eigenvalue(&self) -> f64 {
        max_real_eigenvalue(&self.a)
    }
}

pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `exp(A t)` by scaling and squaring with a Pade approximant.
pub fn matrix_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (a * t).exp()
}

/// Stationary covariance: the solution of `A S + S A^T = -C C^T`.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lin = LinearSde::new(a.clone(), c.clone())?;
    let max_real = lin.max_real_eigenvalue();
    if !(max_real < -1e-12) {
        return Err(Error::NoStationaryCovariance { max_real });
    }
    let n = a.nrows();
    let q = lin.noise_covariance();
    // (I kron A + A kron I) vec(S) = -vec(Q), column-major vec
    let mut k = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i + j * n;
            for l in 0..n {
                k[(row, l + j * n)] += a[(i, l)];
                k[(row, i + l * n)] += a[(j, l)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = k.lu().solve(&rhs).ok_or(Error::NoStationaryCovariance { max_real })?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    let s = (&s + s.transpose()) * 0.5;
    Ok(GaussianMeasure::from_moments(DVector::zeros(n), s)?.cov().clone())
}

/// Numerical rank of the controllability matrix `[C | AC | ... | A^{n-1} C]`.
pub fn kalman_rank(a: &DMatrix<f64>, c: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let k = c.ncols();
    if n == 0 || k == 0 {
        return 0;
    }
    let mut ctrb = DMatrix::zeros(n, n * k);
    let mut block = c.clone();
    for p in 0..n {
        ctrb.view_mut((0, p * k), (n, k)).copy_from(&block);
        block = a * block;
    }
    let sv = ctrb.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-10 * max).count()
}

/// `int_0^t exp(A s) Q exp(A^T s) ds`, by a block exponential on a short
/// step followed by doubling.
pub fn covariance_integral(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if t == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let norm = a.abs().row_sum().max().max(1e-300);
    let mut doublings = 0;
    let mut h = t;
    while norm * h > 0.5 {
        h *= 0.5;
        doublings += 1;
    }
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    block.view_mut((0, n), (n, n)).copy_from(&(q * h));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let f = block.exp();
    let f12 = f.view((0, n), (n, n)).into_owned();
    let e = f.view((n, n), (n, n)).transpose();
    let mut s = &e * f12;
    s = (&s + s.transpose()) * 0.5;
    let mut e = e;
    for _ in 0..doublings {
        s = &s + &e * &s * e.transpose();
        s = (&s + s.transpose()) * 0.5;
        e = &e * &e;
    }
    s
}

/// Law at time `t` started from `N(m0, S0)`.
pub fn ou_moments(lin: &LinearSde, m0: &DVector<f64>, s0: &DMatrix<f64>, t: f64) -> Result<GaussianMeasure> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    let init = GaussianMeasure::new(m0.clone(), s0.clone())?;
    if init.dim() != lin.dim() {
        return Err(Error::Dimension { what: "initial law", expected: lin.dim(), got: init.dim() });
    }
    if t == 0.0 {
        return Ok(init);
    }
    let e = matrix_exp(lin.a(), t);
    let mean = &e * m0;
    let cov = covariance_integral(lin.a(), &lin.noise_covariance(), t) + &e * init.cov() * e.transpose();
    GaussianMeasure::from_moments(mean, cov)
}

/// Condition number of a symmetric matrix from its eigenvalues.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Law of the trailing coordinates given the leading `d` coordinates equal `x`.
pub fn gaussian_condition(g: &GaussianMeasure, d: usize, x: &[f64]) -> Result<GaussianMeasure> {
    let n = g.dim();
    if d == 0 || d >= n {
        return invalid(format!("split {d} must lie strictly inside the dimension {n}"));
    }
    if x.len() != d {
        return Err(Error::Dimension { what: "conditioning value", expected: d, got: x.len() });
    }
    let m = n - d;
    let s = g.cov();
    let sxx = s.view((0, 0), (d, d)).into_owned();
    let syx = s.view((d, 0), (m, d)).into_owned();
    let syy = s.view((d, d), (m, m)).into_owned();
    let condition = symmetric_condition(&sxx);
    if !(condition <= MAX_CONDITION) || max_abs(&sxx) == 0.0 {
        return Err(Error::DegenerateConditioning { condition });
    }
    let chol = sxx.cholesky().ok_or(Error::DegenerateConditioning { condition })?;
    let mx = g.mean().rows(0, d).into_owned();
    let my = g.mean().rows(d, m).into_owned();
    let dx = DVector::from_column_slice(x) - mx;
    let mean = my + &syx * chol.solve(&dx);
    let cov = syy - &syx * chol.solve(&syx.transpose());
    GaussianMeasure::from_moments(mean, cov)
}

/// Marginal law of the coordinates in `keep` (in the given order).
pub fn gaussian_marginal(g: &GaussianMeasure, keep: &[usize]) -> Result<GaussianMeasure> {
    if let Some(bad) = keep.iter().find(|i| **i >= g.dim()) {
        return invalid(format!("index {bad} out of range for dimension {}", g.dim()));
    }
    let k = keep.len();
    let mean = DVector::from_iterator(k, keep.iter().map(|i| g.mean()[*i]));
    let cov = DMatrix::from_fn(k, k, |a, b| g.cov()[(keep[a], keep[b])]);
    GaussianMeasure::new(mean, cov)
}

/// Independent Gaussian initial data `X0 ~ N(mean_x, var_x)`,
/// `Y0 ~ N(mean_y, var_y)` for the planar counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarInitialLaw {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
}

impl PlanarInitialLaw {
    pub fn new(mean_x: f64, mean_y: f64, var_x: f64, var_y: f64) -> Result<Self> {
        if !(var_x >= 0.0 && var_y >= 0.0) || ![mean_x, mean_y, var_x, var_y].iter().all(|v| v.is_finite()) {
            return invalid("initial variances must be finite and non-negative");
        }
        Ok(Self { mean_x, mean_y, var_x, var_y })
    }

    pub fn measure(&self) -> GaussianMeasure {
        GaussianMeasure::new(
            DVector::from_vec(vec![self.mean_x, self.mean_y]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![self.var_x, self.var_y])),
        )
        .expect("validated at construction")
    }
}

/// Drift and noise matrices of the planar counterexample.
pub fn planar_counterexample() -> LinearSde {
    LinearSde::new(
        DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 2f64.sqrt()]),
    )
    .expect("constant coefficients are valid")
}

/// Regression coefficient `Cov(X_t, Y_t) / Var(X_t)` of the planar
/// counterexample, written out in closed form.
pub fn gyongy_phi(t: f64, init: &PlanarInitialLaw) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    let (sxx, syy) = (init.var_x, init.var_y);
    if t == 0.0 {
        return if sxx > 0.0 { Ok(0.0) } else { Err(Error::SingularAtOrigin) };
    }
    let e = (-2.0 * t).exp();
    let num = 1.0 - e * (2.0 * t + 1.0) + 2.0 * t * e * syy;
    let den = 1.0 - e * (2.0 * t * t + 2.0 * t + 1.0 - 2.0 * sxx - 2.0 * t * t * syy);
    if den == 0.0 {
        return Err(Error::SingularAtOrigin);
    }
    Ok(num / den)
}

/// Closed-form mimicking drift `(phi - 1) x + e^{-t} m_y - phi (e^{-t} m_x + t e^{-t} m_y)`.
pub fn gyongy_drift_linear(t: f64, x: f64, init: &PlanarInitialLaw) -> Result<f64> {
    let phi = gyongy_phi(t, init)?;
    let e = (-t).exp();
    Ok((phi - 1.0) * x + e * init.mean_y - phi * (e * init.mean_x + t * e * init.mean_y))
}

/// `d/dx` of the closed-form mimicking drift, `phi(t) - 1`.
pub fn gyongy_drift_slope(t: f64, init: &PlanarInitialLaw) -> Result<f64> {
    Ok(gyongy_phi(t, init)? - 1.0)
}
