use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for covariance symmetry and positive semidefiniteness.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// A Gaussian law `N(mean, cov)` with a validated symmetric PSD covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry, used as the scale for relative tolerances.
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Checks `m` is symmetric and PSD to `PSD_TOLERANCE` relative to its size,
/// returning the symmetrized matrix.
pub fn validate_covariance(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension { what: "covariance columns", expected: m.nrows(), got: m.ncols() });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("covariance entry".into()));
    }
    let scale = max_abs(m);
    let asym = max_abs(&(m - m.transpose()));
    if asym > PSD_TOLERANCE * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let sym = symmetrize(m);
    if sym.nrows() > 0 {
        let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        if min_eig < -PSD_TOLERANCE * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min_eig });
        }
    }
    Ok(sym)
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::Dimension { what: "covariance rows", expected: mean.len(), got: cov.nrows() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("mean entry".into()));
        }
        let cov = validate_covariance(&cov)?;
        Ok(Self { mean, cov })
    }

    /// Builds a measure from computed moments, symmetrizing roundoff first.
    pub(crate) fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let sym = symmetrize(&cov);
        Self::new(mean, sym)
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Density at `z`; requires a nonsingular covariance.
    pub fn pdf(&self, z: &[f64]) -> Result<f64> {
        let n = self.dim();
        let chol = self
            .cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveSemidefinite { min_eigenvalue: 0.0 })?;
        let diff = DVector::from_column_slice(z) - &self.mean;
        let sol = chol.solve(&diff);
        let quad = diff.dot(&sol);
        let det: f64 = chol.l().diagonal().iter().map(|v| v * v).product();
        Ok((-0.5 * quad).exp() / ((2.0 * std::f64::consts::PI).powi(n as i32) * det).sqrt())
    }
}
