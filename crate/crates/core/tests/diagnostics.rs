use std::f64::consts::{PI, SQRT_2};

use approx::assert_abs_diff_eq;
use cgsde_core::coarse_grain::{ReducedKind, ReducedModel};
use cgsde_core::diagnostics::*;
use cgsde_core::linear_gaussian::{gyongy_drift_linear, gyongy_phi, solve_lyapunov, LinearSde, PlanarInitialLaw};
use cgsde_core::model::*;
use cgsde_core::systems::*;
use cgsde_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn window(n: usize) -> UniformGrid {
    UniformGrid::new(-5.0, 5.0, n).unwrap()
}

fn gibbs_density(v: &Potential, n: usize) -> GridDensity2D {
    GridDensity2D::from_fn(window(n), window(n), |x, y| v.gibbs(x, y)).unwrap().normalize_density().unwrap()
}

fn stationary_density(system: &SlowFastSystem, n: usize) -> GridDensity2D {
    let lin = LinearSde::from_system(system).unwrap();
    let gm = GaussianMeasure::new(DVector::zeros(2), solve_lyapunov(lin.a(), lin.c()).unwrap()).unwrap();
    GridDensity2D::from_fn(window(n), window(n), |x, y| gm.pdf(&[x, y]).unwrap()).unwrap()
}

fn affine(row: [f64; 2]) -> CoefficientField {
    CoefficientField::affine(&DMatrix::from_row_slice(1, 2, &row), &DVector::zeros(1), 1).unwrap()
}

fn linear_system(f: [f64; 2], g: [f64; 2]) -> SlowFastSystem {
    SlowFastSystem::new(
        affine(f),
        affine(g),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )
    .unwrap()
}

// the quadratic default potential V = x^2/2 + y^2/2 + xy/2, written as affine fields
fn linear_gradient() -> SlowFastSystem {
    linear_system([-1.0, -0.5], [-0.5, -1.0])
}

fn linear_symplectic() -> SlowFastSystem {
    linear_system([-0.5, 0.5], [-1.5, -1.5])
}

#[test]
fn stationary_ou_residual_is_second_order() {
    let rho = stationary_density(&planar_ou(), 201);
    let fine = fp_adjoint(&rho, &planar_ou()).unwrap().interior_norms();
    let coarse = fp_adjoint(&rho.coarsened().unwrap(), &planar_ou()).unwrap().interior_norms();
    let decay = Decay::between(coarse.sup, fine.sup);
    assert!(decay.second_order, "ratio {}", decay.ratio);
    assert!(fine.sup < 5e-3, "sup {} ratio {}", fine.sup, decay.ratio);
}

#[test]
fn constant_density_without_drift_has_zero_parts() {
    let system = SlowFastSystem::new(
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::constant(&DMatrix::from_element(1, 1, 0.7), 1, 1),
        CoefficientField::constant(&DMatrix::from_element(1, 1, 1.3), 1, 1),
    )
    .unwrap()
    .with_cross_diffusion(CoefficientField::constant(&DMatrix::from_element(1, 1, 0.2), 1, 1))
    .unwrap();
    let rho = GridDensity2D::from_fn(window(21), window(21), |_, _| 0.01).unwrap();
    let parts = fp_adjoint_parts(&rho, &system).unwrap();
    for f in [&parts.slow, &parts.cross, &parts.fast] {
        assert!(f.values.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn small_grids_are_rejected() {
    let rho = GridDensity2D::from_fn(window(8), window(21), |_, _| 0.01).unwrap();
    assert!(matches!(fp_adjoint_parts(&rho, &planar_ou()), Err(Error::GridTooCoarse { .. })));
}

#[test]
fn gibbs_density_solves_both_gradient_parts() {
    let v = Potential::default_coupled();
    let system = gradient_system(&v);
    let report = check_prop41(&gibbs_density(&v, 201), &system, 1e-2).unwrap();
    assert!(report.slow_cross_decay.second_order, "{:?}", report.slow_cross_decay);
    assert!(report.fast_decay.second_order, "{:?}", report.fast_decay);
    assert!(report.fine.slow_cross.sup < 1e-3 && report.fine.fast.sup < 1e-3);
}

#[test]
fn coincidence_verdicts() {
    let v = Potential::default_coupled();
    let rho = gibbs_density(&v, 201);
    let grad = check_prop41(&rho, &gradient_system(&v), 1e-2).unwrap();
    let block = check_prop41(&rho, &j_block_system(&v), 1e-2).unwrap();
    let sympl = check_prop41(&rho, &symplectic_system(&v), 1e-2).unwrap();
    assert_eq!(grad.verdict, Prop41Verdict::Coincide);
    assert_eq!(block.verdict, Prop41Verdict::Coincide);
    assert_eq!(block.fine, grad.fine);
    assert_eq!(sympl.verdict, Prop41Verdict::DoNotCoincide);
    assert!(sympl.fast_decay.non_decaying, "{:?}", sympl.fast_decay);
    assert!(sympl.fine.fast.sup > 0.05);
    // the joint density stays invariant, only the split fails
    assert!(sympl.full_decay.second_order, "{:?}", sympl.full_decay);
    assert_eq!(Prop41Verdict::DoNotCoincide.as_str(), "do not coincide");
}

#[test]
fn vanishing_marginal_is_refused() {
    let rho = GridDensity2D::from_fn(window(41), window(41), |x, y| if x < 0.0 { (-y * y).exp() } else { 0.0 }).unwrap();
    assert!(matches!(check_prop41(&rho, &planar_ou(), 1e-2), Err(Error::VanishingMarginal { .. })));
}

fn normal_density(g: UniformGrid, var: f64) -> Density1D {
    Density1D::from_fn(g, |x| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()).unwrap()
}

#[test]
fn averaged_limit_is_stationary_for_unit_normal() {
    let model = ReducedModel::scalar_linear(ReducedKind::Averaged, -1.0, 0.0, SQRT_2).unwrap();
    let g = UniformGrid::new(-8.0, 8.0, 321).unwrap();
    let right = check_solvability(&normal_density(g, 1.0), &model, 0.0).unwrap();
    assert!(right.decay.second_order, "{:?}", right.decay);
    assert!(right.stationary_at(1e-3));
    let wrong = check_solvability(&normal_density(g, 2.0), &model, 0.0).unwrap();
    assert!(wrong.decay.non_decaying, "{:?}", wrong.decay);
    assert!(!wrong.stationary_at(1e-2));
}

#[test]
fn uniform_density_is_stationary_without_drift() {
    let model = ReducedModel::scalar_linear(ReducedKind::Averaged, 0.0, 0.0, 1.0).unwrap();
    let rho = Density1D::from_fn(UniformGrid::new(0.0, 1.0, 41).unwrap(), |_| 1.0).unwrap();
    let r = check_solvability(&rho, &model, 0.0).unwrap();
    assert_eq!(r.fine.sup, 0.0);
    assert_eq!(r.coarse.sup, 0.0);
    assert!(r.warning.is_some());
}

const SWEEP_EPS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

#[test]
fn noisy_slow_conditional_converges_at_first_order() {
    let r = ecd_epsilon_sweep(&ou_noisy_slow, 1.0, &SWEEP_EPS, &ConditionalSource::Analytic).unwrap();
    for row in &r.rows {
        let e = row.eps;
        assert_abs_diff_eq!(row.ecd_mean, e / (1.0 + 2.0 * e), epsilon = 1e-12);
        assert_abs_diff_eq!(row.ecd_var, 1.0 - e * e / ((1.0 + e) * (1.0 + 2.0 * e)), epsilon = 1e-12);
        assert_abs_diff_eq!(row.frozen_mean, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(row.frozen_var, 1.0, epsilon = 1e-12);
    }
    assert!(r.rows.windows(2).all(|w| w[1].distance < w[0].distance));
    let slope = r.slope.unwrap();
    assert!((0.8..=1.2).contains(&slope), "slope {slope}");
}

#[test]
fn counterexample_conditional_does_not_converge() {
    let r = ecd_epsilon_sweep(&ou_counterexample, 1.0, &SWEEP_EPS, &ConditionalSource::Analytic).unwrap();
    for row in &r.rows {
        assert_abs_diff_eq!(row.ecd_mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.ecd_var, 1.0 - row.eps / (1.0 + row.eps), epsilon = 1e-12);
        assert!(row.distance >= 1.0);
    }
    assert!(r.rows.last().unwrap().distance >= 0.9);
}

#[test]
fn decoupled_family_has_zero_distance() {
    let family = |eps: f64| linear_system([-1.0, 0.0], [0.0, -1.0]).with_scale(eps);
    let r = ecd_epsilon_sweep(&family, 1.0, &SWEEP_EPS, &ConditionalSource::Analytic).unwrap();
    assert!(r.rows.iter().all(|row| row.distance < 1e-12), "{:?}", r.rows);
}

#[test]
fn single_scale_has_no_slope() {
    let r = ecd_epsilon_sweep(&ou_noisy_slow, 1.0, &[0.1], &ConditionalSource::Analytic).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.slope.is_none());
    assert!(ecd_epsilon_sweep(&ou_noisy_slow, 1.0, &[], &ConditionalSource::Analytic).is_err());
}

#[test]
fn mean_force_identity() {
    let xs: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
    let q = QuadratureConfig::new(-12.0, 22.0, 3401, 1e-3).unwrap();
    let sep = check_mean_force(&Potential::quadratic(1.0, 1.0, 0.0), &xs, &q).unwrap();
    assert!(sep.sup_discrepancy <= 1e-6);
    for (x, f) in xs.iter().zip(&sep.projected_drift) {
        assert_abs_diff_eq!(*f, -x, epsilon = 1e-9);
    }
    let shifted = check_mean_force(&Potential::shifted_well(), &xs, &q).unwrap();
    assert!(shifted.sup_discrepancy <= 1e-6);
    for (x, s) in xs.iter().zip(&shifted.log_marginal_slope) {
        assert_abs_diff_eq!(*s, -x, epsilon = 1e-6);
    }
    assert!(check_mean_force(&Potential::quartic_channel(), &xs, &q).unwrap().sup_discrepancy <= 1e-5);
}

#[test]
fn mean_force_needs_covering_quadrature() {
    let q = QuadratureConfig::new(-1.0, 1.0, 201, 1e-3).unwrap();
    assert!(check_mean_force(&Potential::shifted_well(), &[2.0], &q).is_err());
}

fn times(a: f64, b: f64, n: usize) -> Vec<f64> {
    UniformGrid::new(a, b, n).unwrap().points()
}

#[test]
fn obtuse_angle_cases() {
    let xs = UniformGrid::new(-3.0, 3.0, 61).unwrap();
    let ts = times(0.0, 20.0, 41);
    let linear = check_obtuse_angle_1d(&|_, x| Ok(-x), &ts, &xs, 1.0).unwrap();
    assert!(linear.holds);
    assert_abs_diff_eq!(linear.sup_derivative, -1.0, epsilon = 1e-8);

    let rate = |t: f64| 2.0 + t.sin();
    let varying = check_obtuse_angle_1d(&|t, x| Ok(-rate(t) * x), &ts, &xs, 1.0).unwrap();
    assert!(varying.holds, "{varying:?}");
    assert!(!check_obtuse_angle_1d(&|t, x| Ok(-rate(t) * x), &ts, &xs, 1.5).unwrap().holds);

    let init = PlanarInitialLaw::new(-1.0, 5.0, 0.1, 1.0).unwrap();
    let late = times(5.0, 20.0, 31);
    for lambda0 in [0.01, 0.1, 0.75] {
        let r = check_obtuse_angle_1d(&|t, x| gyongy_drift_linear(t, x, &init), &late, &xs, lambda0).unwrap();
        assert!(!r.holds, "lambda0 {lambda0}: {r:?}");
    }
}

#[test]
fn obtuse_angle_matches_closed_form_slope() {
    let xs = UniformGrid::new(-3.0, 3.0, 61).unwrap();
    for var_x in [0.1, 10.0] {
        let init = PlanarInitialLaw::new(-1.0, 5.0, var_x, 1.0).unwrap();
        for t in [0.5, 1.0, 2.0, 5.0, 20.0] {
            let r = check_obtuse_angle_1d(&|t, x| gyongy_drift_linear(t, x, &init), &[t], &xs, 0.0).unwrap();
            assert_abs_diff_eq!(r.sup_derivative, gyongy_phi(t, &init).unwrap() - 1.0, epsilon = 1e-8);
        }
    }
}

#[test]
fn lyapunov_function_cases() {
    let ou = Generator::new(1, |x, out| out[0] = -x[0], |_| 2.0);
    let r = check_lyapunov_condition(&ou, 1.0, 10.0, 201).unwrap();
    assert!(r.holds);
    assert_abs_diff_eq!(r.c1, 3.0, epsilon = 1e-12);
    assert!(r.c1 <= 4.0);

    let free = Generator::new(1, |_, out| out[0] = 0.0, |_| 1.0);
    let r = check_lyapunov_condition(&free, 0.5, 10.0, 201).unwrap();
    assert!(!r.holds);
    assert!(r.c1_doubled > r.c1);

    let r = check_lyapunov_condition(&Generator::of_system(&planar_ou()), 0.5, 10.0, 101).unwrap();
    assert!(r.holds, "{r:?}");
    assert!(r.c1.is_finite());
}

#[test]
fn ellipticity_and_coefficient_limits() {
    let xs = UniformGrid::new(-3.0, 3.0, 31).unwrap();
    let ts = times(0.0, 20.0, 11);
    let eps = 0.5;
    let projected = ReducedModel::scalar_linear(ReducedKind::Projected, -(1.0 - eps / (1.0 + 2.0 * eps)), 0.0, SQRT_2).unwrap();
    let r = audit_ellipticity(&projected, &ts, &xs).unwrap();
    assert!(r.holds);
    assert_abs_diff_eq!(r.min_eigenvalue, 2.0, epsilon = 1e-12);

    let init = PlanarInitialLaw::new(-1.0, 5.0, 0.1, 1.0).unwrap();
    let gyongy = ReducedModel::gyongy_planar(init, 20.0).unwrap();
    assert!(!audit_ellipticity(&gyongy, &ts[1..], &xs).unwrap().holds);

    let limit = ReducedModel::scalar_linear(ReducedKind::Projected, 0.0, 0.0, 0.0).unwrap();
    let c = audit_coefficient_limits(&gyongy, &limit, 20.0, &xs.points(), 1e-6).unwrap();
    assert!(c.holds, "{c:?}");
    assert!(c.sup_at_end <= c.sup_at_half);
}

#[test]
fn frozen_law_agrees_with_conditional_exactly_when_coincident() {
    let v = Potential::default_coupled();
    let rho = gibbs_density(&v, 201);
    for (linear, grid_system) in [(linear_gradient(), gradient_system(&v)), (linear_symplectic(), symplectic_system(&v))] {
        let report = check_prop41(&rho, &grid_system, 1e-2).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.0, 2.5] {
            let frozen = frozen_stationary_law(&linear, &[x]).unwrap();
            let ecd = ecd_gaussian(&linear, &[x]).unwrap();
            let dm = (frozen.mean()[0] - ecd.mean()[0]).abs();
            let dv = (frozen.cov()[(0, 0)] - ecd.cov()[(0, 0)]).abs();
            match report.verdict {
                Prop41Verdict::Coincide => assert!(dm <= 1e-8 && dv <= 1e-8, "x = {x}: {dm} {dv}"),
                Prop41Verdict::DoNotCoincide => assert!(dv > 1e-2, "x = {x}: {dv}"),
            }
        }
    }
}

#[test]
fn affine_and_closure_systems_share_residuals() {
    let v = Potential::default_coupled();
    let rho = gibbs_density(&v, 101);
    for (a, b) in [(linear_gradient(), gradient_system(&v)), (linear_symplectic(), symplectic_system(&v))] {
        let (ra, rb) = (fp_adjoint(&rho, &a).unwrap(), fp_adjoint(&rho, &b).unwrap());
        for (p, q) in ra.values.iter().zip(&rb.values) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-12);
        }
    }
}

#[test]
fn residuals_are_second_order_for_stationary_gaussians() {
    for system in [planar_ou(), linear_gradient(), ou_noisy_slow(0.5).unwrap()] {
        let rho = stationary_density(&system, 241);
        let fine = fp_adjoint(&rho, &system).unwrap().interior_norms();
        let coarse = fp_adjoint(&rho.coarsened().unwrap(), &system).unwrap().interior_norms();
        let d = Decay::between(coarse.sup, fine.sup);
        assert!(d.second_order, "ratio {}", d.ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_parts_add_up(
        f in prop::array::uniform2(-2.0f64..2.0),
        g in prop::array::uniform2(-2.0f64..2.0),
        a in 0.1f64..2.0,
        b in 0.1f64..2.0,
        c in -1.0f64..1.0,
        s in 0.3f64..2.0,
    ) {
        let system = SlowFastSystem::new(
            CoefficientField::function(1, 1, 1, 1, move |_, x, y, out| out[0] = f[0] * x[0] + f[1] * y[0].sin()),
            affine(g),
            CoefficientField::function(1, 1, 1, 1, move |_, x, _, out| out[0] = a * (1.0 + 0.1 * x[0] * x[0]).sqrt()),
            CoefficientField::constant(&DMatrix::from_element(1, 1, b), 1, 1),
        )
        .unwrap()
        .with_cross_diffusion(CoefficientField::constant(&DMatrix::from_element(1, 1, c), 1, 1))
        .unwrap();
        let grid = UniformGrid::new(-4.0, 4.0, 41).unwrap();
        let rho = GridDensity2D::from_fn(grid, grid, |x, y| (-(x * x + y * y) / (2.0 * s)).exp()).unwrap();
        let parts = fp_adjoint_parts(&rho, &system).unwrap().total();
        let single = fp_adjoint(&rho, &system).unwrap();
        for (p, q) in parts.values.iter().zip(&single.values) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        // triangle inequality on the interior norms
        let fine = check_prop41(&rho, &system, 1.0).unwrap().fine;
        prop_assert!(fine.full.sup <= fine.slow_cross.sup + fine.fast.sup + 1e-12);
        prop_assert!(fine.full.l2 <= fine.slow_cross.l2 + fine.fast.l2 + 1e-12);
    }

    #[test]
    fn stationary_gaussian_residuals_decay(sxx in 0.3f64..1.5, syy in 0.3f64..1.5, r in -0.6f64..0.6) {
        // stationary for dZ = -S^{-1} Z dt + sqrt(2) dB
        let sxy = r * (sxx * syy).sqrt();
        let cov = DMatrix::from_row_slice(2, 2, &[sxx, sxy, sxy, syy]);
        let p = cov.clone().try_inverse().unwrap();
        let system = linear_system([-p[(0, 0)], -p[(0, 1)]], [-p[(1, 0)], -p[(1, 1)]]);
        let gm = GaussianMeasure::new(DVector::zeros(2), cov).unwrap();
        let g = UniformGrid::new(-7.0, 7.0, 281).unwrap();
        let rho = GridDensity2D::from_fn(g, g, |x, y| gm.pdf(&[x, y]).unwrap()).unwrap();
        let fine = fp_adjoint(&rho, &system).unwrap().interior_norms();
        let coarse = fp_adjoint(&rho.coarsened().unwrap(), &system).unwrap().interior_norms();
        let d = Decay::between(coarse.sup, fine.sup);
        prop_assert!(d.second_order, "ratio {}", d.ratio);
    }
}
