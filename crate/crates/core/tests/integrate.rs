use std::f64::consts::SQRT_2;

use approx::assert_abs_diff_eq;
use cgsde_core::integrate::*;
use cgsde_core::linear_gaussian::{gyongy_drift_linear, PlanarInitialLaw};
use cgsde_core::model::{CoefficientField, SlowFastSystem, Snapshot};
use cgsde_core::systems::ou_counterexample;
use cgsde_core::Error;
use nalgebra::{DMatrix, DVector};

/// `dX = -theta X dt + sigma dW` on the line.
struct ScalarOu {
    theta: f64,
    sigma: f64,
}

impl SdeModel for ScalarOu {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn em_step(&self, _t: f64, dt: f64, z: &mut [f64], dw: &[f64], _work: &mut [f64]) {
        z[0] += -self.theta * z[0] * dt + self.sigma * dw[0];
    }
}

/// Accumulates `scale * W_t`.
struct ScaledBrownian(f64);

impl SdeModel for ScaledBrownian {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn em_step(&self, _t: f64, _dt: f64, z: &mut [f64], dw: &[f64], _work: &mut [f64]) {
        z[0] += self.0 * dw[0];
    }
}

fn column_stats(s: &Snapshot, j: usize) -> (f64, f64, f64) {
    let v = s.column(j);
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var, var * (2.0 / (n - 1.0)).sqrt())
}

/// Sample covariance entry and its standard error from the spread of centered products.
fn cov_entry(s: &Snapshot, i: usize, j: usize) -> (f64, f64) {
    let (a, b) = (s.column(i), s.column(j));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let c = prods.iter().sum::<f64>() / (n - 1.0);
    let sd = (prods.iter().map(|p| (p - c) * (p - c)).sum::<f64>() / (n - 1.0)).sqrt();
    (c, sd / n.sqrt())
}

#[test]
fn scale_separated_ou_covariance() {
    let eps = 0.25;
    let system = ou_counterexample(eps).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 10.0, 20_000, 42).unwrap().with_record_every(10_000).unwrap();
    let traj = simulate_full(&system, &InitialCondition::Fixed(vec![0.0, 0.0]), &cfg).unwrap();
    let r = eps / (1.0 + eps);
    let expected = [[r, r], [r, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            let (c, se) = cov_entry(traj.last(), i, j);
            assert!((c - expected[i][j]).abs() <= 3.0 * se, "entry ({i},{j}): {c} vs {} (se {se})", expected[i][j]);
        }
    }
}

#[test]
fn zero_coefficients_freeze_the_state() {
    let system = SlowFastSystem::new(
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
    )
    .unwrap();
    let cfg = IntegratorConfig::new(0.1, 2.0, 7, 1).unwrap();
    let traj = simulate_full(&system, &InitialCondition::Fixed(vec![1.5, -0.5]), &cfg).unwrap();
    for s in traj.snapshots() {
        for r in s.rows() {
            assert_eq!(r, &[1.5, -0.5]);
        }
    }
    let frozen = simulate_frozen(&system, &[3.0], &InitialCondition::Fixed(vec![2.0]), &cfg).unwrap();
    assert!(frozen.last().rows().all(|r| r == [2.0]));
}

#[test]
fn scalar_ou_reaches_unit_variance() {
    let cfg = IntegratorConfig::new(1e-3, 20.0, 20_000, 9).unwrap().with_record_every(20_000).unwrap();
    let traj = simulate(&ScalarOu { theta: 1.0, sigma: SQRT_2 }, &InitialCondition::Fixed(vec![0.0]), &cfg).unwrap();
    let (_, var, se) = column_stats(traj.last(), 0);
    assert!((var - 1.0).abs() <= 3.0 * se, "{var} (se {se})");
}

#[test]
fn frozen_fast_process_is_standard_normal() {
    let system = ou_counterexample(0.1).unwrap();
    let cfg = IntegratorConfig::new(5e-3, 10.0, 20_000, 4).unwrap().with_record_every(2000).unwrap();
    for x in [-2.0, 0.0, 1.0] {
        let traj = simulate_frozen(&system, &[x], &InitialCondition::Fixed(vec![3.0]), &cfg).unwrap();
        let (m, var, se) = column_stats(traj.last(), 0);
        assert!((var - 1.0).abs() <= 3.0 * se, "x = {x}: {var}");
        assert!(m.abs() <= 3.0 / (20_000f64).sqrt());
    }
}

#[test]
fn frozen_process_tracks_shifted_mean() {
    let g = CoefficientField::affine(&DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), &DVector::zeros(1), 1).unwrap();
    let system = SlowFastSystem::new(
        CoefficientField::zero(1, 1, 1, 1),
        g,
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::scaled_identity(1, SQRT_2, 1, 1),
    )
    .unwrap();
    let n = 20_000;
    let cfg = IntegratorConfig::new(5e-3, 10.0, n, 8).unwrap().with_record_every(2000).unwrap();
    for x in [-1.0, 0.0, 2.0] {
        let traj = simulate_frozen(&system, &[x], &InitialCondition::Fixed(vec![0.0]), &cfg).unwrap();
        let (m, var, _) = column_stats(traj.last(), 0);
        assert!((m - x).abs() <= 3.0 * (var / n as f64).sqrt(), "x = {x}: mean {m}");
    }
}

#[test]
fn non_finite_states_name_the_particle() {
    let system = SlowFastSystem::new(
        CoefficientField::function(1, 1, 1, 1, |_, x, _, out| out[0] = x[0] * x[0]),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
        CoefficientField::zero(1, 1, 1, 1),
    )
    .unwrap();
    let cfg = IntegratorConfig::new(0.1, 50.0, 3, 0).unwrap();
    let err = simulate_full(&system, &InitialCondition::Fixed(vec![1.0, 0.0]), &cfg).unwrap_err();
    assert!(matches!(err, Error::NonFinite { particle: 0, .. }), "{err:?}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let system = ou_counterexample(0.5).unwrap();
    let init = InitialCondition::Gaussian(
        cgsde_core::model::GaussianMeasure::new(DVector::from_vec(vec![-1.0, 5.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 1.0]))).unwrap(),
    );
    let cfg = IntegratorConfig::new(1e-2, 2.0, 257, 77).unwrap().with_record_every(10).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_full(&system, &init, &cfg).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        let other = run(threads);
        assert_eq!(one.times(), other.times());
        for (a, b) in one.snapshots().iter().zip(other.snapshots()) {
            let same = a.as_slice().iter().zip(b.as_slice()).all(|(u, v)| u.to_bits() == v.to_bits());
            assert!(same, "{threads} threads changed the trajectory");
        }
    }
}

#[test]
fn euler_maruyama_has_weak_order_one() {
    let model = ScalarOu { theta: 1.0, sigma: SQRT_2 };
    let (x0, t_end) = (10.0, 1.0);
    let exact = x0 * (-t_end as f64).exp();
    let bias = |dt: f64| -> f64 {
        let mut total = 0.0;
        for rep in 0..20u64 {
            let cfg = IntegratorConfig::new(dt, t_end, 100_000, 1000 + rep).unwrap().with_record_every(1_000_000).unwrap();
            let traj = simulate(&model, &InitialCondition::Fixed(vec![x0]), &cfg).unwrap();
            let (m, _, _) = column_stats(traj.last(), 0);
            total += (m - exact).abs();
        }
        total / 20.0
    };
    let ratio = bias(0.1) / bias(0.05);
    assert!((1.7..=2.3).contains(&ratio), "weak-order ratio {ratio}");
}

#[test]
fn common_seed_means_common_noise() {
    let cfg = IntegratorConfig::new(0.01, 1.0, 16, 5).unwrap();
    let init = InitialCondition::Fixed(vec![0.0]);
    let a = simulate(&ScaledBrownian(1.0), &init, &cfg).unwrap();
    let b = simulate(&ScaledBrownian(-3.0), &init, &cfg).unwrap();
    for (sa, sb) in a.snapshots().iter().zip(b.snapshots()) {
        for (u, v) in sa.as_slice().iter().zip(sb.as_slice()) {
            assert_abs_diff_eq!(-3.0 * u, *v, epsilon = 1e-12);
        }
    }
}

#[test]
fn rk_scalar_decay() {
    let path = rk_solve(
        |_, x, out| {
            out[0] = -x[0];
            Ok(())
        },
        &[1.0],
        0.0,
        1.0,
        1e-9,
    )
    .unwrap();
    assert_abs_diff_eq!(path.final_state()[0], (-1.0f64).exp(), epsilon = 1e-9);
    for x0 in [-2.0, 0.5, 3.0] {
        let p = rk_solve(
            |_, x, out| {
                out[0] = -x[0];
                Ok(())
            },
            &[x0],
            0.0,
            4.0,
            1e-9,
        )
        .unwrap();
        for t in [0.3, 1.7, 3.9] {
            assert_abs_diff_eq!(p.eval(t).unwrap()[0], x0 * (-t as f64).exp(), epsilon = 1e-8);
        }
    }
}

fn rk4_oracle(f: impl Fn(f64, f64) -> f64, x0: f64, t_end: f64, dt: f64) -> f64 {
    let n = (t_end / dt).round() as usize;
    let mut x = x0;
    for i in 0..n {
        let t = i as f64 * dt;
        let k1 = f(t, x);
        let k2 = f(t + dt / 2.0, x + dt / 2.0 * k1);
        let k3 = f(t + dt / 2.0, x + dt / 2.0 * k2);
        let k4 = f(t + dt, x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

#[test]
fn mimicking_ode_matches_fixed_step_oracle() {
    let init = PlanarInitialLaw::new(-1.0, 5.0, 0.1, 1.0).unwrap();
    for x0 in [-1.0, -1.6, 0.2] {
        let path = rk_solve(
            |t, x, out| {
                out[0] = gyongy_drift_linear(t, x[0], &init)?;
                Ok(())
            },
            &[x0],
            0.0,
            20.0,
            1e-9,
        )
        .unwrap();
        let oracle = rk4_oracle(|t, x| gyongy_drift_linear(t, x, &init).unwrap(), x0, 20.0, 1e-5);
        assert_abs_diff_eq!(path.final_state()[0], oracle, epsilon = 1e-6);
    }
}

#[test]
fn stratonovich_corrections() {
    let zero = CoefficientField::zero(1, 1, 1, 0);
    let linear = CoefficientField::function(1, 1, 1, 0, |_, x, _, out| out[0] = x[0]);
    let b = ito_to_stratonovich_drift(&zero, &linear).unwrap();
    for x in [-2.0, 0.3, 5.0] {
        assert_abs_diff_eq!(b.eval_vector(0.0, &[x], &[])[0], -x / 2.0, epsilon = 1e-8);
    }
    let drift = CoefficientField::function(1, 1, 1, 0, |_, x, _, out| out[0] = -x[0]);
    let sigma = CoefficientField::function(1, 1, 1, 0, |_, x, _, out| out[0] = (1.0 + x[0] * x[0]).sqrt());
    let b = ito_to_stratonovich_drift(&drift, &sigma).unwrap();
    for x in [-3.0, -0.5, 0.0, 1.0, 4.0] {
        assert_abs_diff_eq!(b.eval_vector(0.0, &[x], &[])[0], -x - x / 2.0, epsilon = 1e-6);
    }
    let constant = CoefficientField::scaled_identity(1, 2.0, 1, 0);
    let b = ito_to_stratonovich_drift(&drift, &constant).unwrap();
    assert_eq!(b.eval_vector(0.0, &[1.25], &[])[0], -1.25);
}
