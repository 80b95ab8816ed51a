//! Reduced models for the slow variable: averaged, projected and mimicking.

pub mod estimators;
pub mod reduced;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::model::validate_covariance;

pub use estimators::{
    average_coefficients, bin_table, conditional_statistics, estimate_ecd, gyongy_coefficients, project_coefficients,
    split_snapshot, ConditionalLaw, LocalCoefficients, DIFFUSION_FIELD, DRIFT_FIELD,
};
pub use reduced::{simulate_reduced, BinTable, DriftFn, Provenance, ReducedKind, ReducedModel};

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues from
/// round-off are clipped to zero.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = validate_covariance(m)?;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    // exact symmetry; the product above is only symmetric to rounding
    Ok((&r + r.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = matrix_sqrt_psd(&m).unwrap();
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }
}
