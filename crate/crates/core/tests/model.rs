use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use cgsde_core::model::*;
use cgsde_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn gaussian_2d(sxx: f64, sxy: f64, syy: f64) -> impl Fn(f64, f64) -> f64 {
    let det = sxx * syy - sxy * sxy;
    move |x, y| {
        let q = (syy * x * x - 2.0 * sxy * x * y + sxx * y * y) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }
}

fn normal(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[test]
fn unnormalized_gaussian_normalizes() {
    let g = UniformGrid::new(-6.0, 6.0, 241).unwrap();
    let raw = GridDensity2D::from_fn(g, g, |x, y| (-(x * x + y * y) / 2.0).exp()).unwrap();
    assert!((raw.mass() - 2.0 * PI).abs() < 1e-6);
    let n = raw.normalize_density().unwrap();
    assert!((n.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn marginal_of_product_density() {
    let g = UniformGrid::new(-6.0, 6.0, 241).unwrap();
    let (p, q) = (normal(0.5, 0.7), normal(-1.0, 2.0));
    let rho = GridDensity2D::from_fn(g, g, |x, y| p(x) * q(y)).unwrap();
    let m = rho.marginal_x();
    let qmass = g.trapz(&g.points().iter().map(|&y| q(y)).collect::<Vec<_>>());
    for (i, v) in m.values().iter().enumerate() {
        assert_abs_diff_eq!(*v, p(g.point(i)) * qmass, epsilon = 1e-14);
    }
    let c = rho.conditional_y_given_x(1.3).unwrap();
    for (j, v) in c.values().iter().enumerate() {
        assert_abs_diff_eq!(*v, q(g.point(j)) / qmass, epsilon = 1e-12);
    }
}

#[test]
fn planar_stationary_marginal_and_conditional() {
    let g = UniformGrid::new(-6.0, 6.0, 241).unwrap();
    let rho = GridDensity2D::from_fn(g, g, gaussian_2d(0.5, 0.5, 1.0)).unwrap().normalize_density().unwrap();
    let m = rho.marginal_x();
    assert!((m.mass() - 1.0).abs() < 1e-10);
    let ref_m = normal(0.0, 0.5);
    for (i, v) in m.values().iter().enumerate() {
        assert!((v - ref_m(g.point(i))).abs() < 1e-4);
    }
    let c = rho.conditional_y_given_x(0.3).unwrap();
    assert!((c.mass() - 1.0).abs() < 1e-8);
    let ref_c = normal(0.3, 0.5);
    for (j, v) in c.values().iter().enumerate() {
        assert!((v - ref_c(g.point(j))).abs() < 1e-4);
    }
}

#[test]
fn noisy_slow_marginal() {
    let eps = 0.5;
    let (sxx, sxy) = ((1.0 + 2.0 * eps) / (1.0 + eps), eps / (1.0 + eps));
    let g = UniformGrid::new(-8.0, 8.0, 321).unwrap();
    let rho = GridDensity2D::from_fn(g, g, gaussian_2d(sxx, sxy, 1.0)).unwrap().normalize_density().unwrap();
    let m = rho.marginal_x();
    assert!((m.variance() - 4.0 / 3.0).abs() < 1e-6);
    let ref_m = normal(0.0, 4.0 / 3.0);
    for (i, v) in m.values().iter().enumerate() {
        assert!((v - ref_m(g.point(i))).abs() < 1e-4);
    }
}

#[test]
fn concentrated_marginal_is_vanishing() {
    let g = UniformGrid::new(-5.0, 5.0, 101).unwrap();
    let rho = GridDensity2D::from_fn(g, g, |x, y| if x.abs() < 0.06 { (-y * y).exp() } else { 0.0 }).unwrap();
    assert!(matches!(rho.conditional_y_given_x(3.0), Err(Error::VanishingMarginal { .. })));
    assert!(rho.conditional_y_given_x(0.0).is_ok());
}

#[test]
fn covariance_validation() {
    assert!(matches!(
        GaussianMeasure::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])),
        Err(Error::NotSymmetric { .. })
    ));
    assert!(matches!(
        GaussianMeasure::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])),
        Err(Error::NotPositiveSemidefinite { .. })
    ));
    assert!(GaussianMeasure::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_is_conditional_times_marginal(
        sxx in 0.2f64..2.0,
        syy in 0.2f64..2.0,
        rho_c in -0.9f64..0.9,
        mx in -1.0f64..1.0,
        bump in 0.0f64..0.5,
    ) {
        let sxy = rho_c * (sxx * syy).sqrt();
        let f = gaussian_2d(sxx, sxy, syy);
        let g = UniformGrid::new(-5.0, 5.0, 101).unwrap();
        let rho = GridDensity2D::from_fn(g, g, |x, y| f(x - mx, y) + bump * f(y, x)).unwrap().normalize_density().unwrap();
        let marginal = rho.marginal_x();
        for i in 0..g.len() {
            let x = g.point(i);
            let m = marginal.values()[i];
            if m <= 1e-8 {
                continue;
            }
            let c = rho.conditional_y_given_x(x).unwrap();
            for (j, cv) in c.values().iter().enumerate() {
                prop_assert!((cv * m - rho.value(i, j)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_measures_are_symmetric_psd(v in prop::collection::vec(-2.0f64..2.0, 9)) {
        let b = DMatrix::from_row_slice(3, 3, &v);
        let cov = &b * b.transpose();
        let g = GaussianMeasure::new(DVector::zeros(3), cov).unwrap();
        prop_assert_eq!(g.cov().clone(), g.cov().transpose());
        let min = nalgebra::SymmetricEigen::new(g.cov().clone()).eigenvalues.min();
        prop_assert!(min >= -1e-12 * g.cov().norm());
    }
}
