//! The planar OU counterexample: averaging gives `-x`, projection gives `0`.

use cgsde_core::coarse_grain::{average_coefficients, conditional_statistics, project_coefficients, split_snapshot, ConditionalLaw};
use cgsde_core::diagnostics::{ecd_gaussian, frozen_stationary_law};
use cgsde_core::integrate::{simulate_full, InitialCondition, IntegratorConfig};
use cgsde_core::linear_gaussian::{solve_lyapunov, LinearSde};
use cgsde_core::model::{Binning, Snapshot};
use cgsde_core::stats::weighted_line_fit;
use cgsde_core::systems::ou_counterexample;
use cgsde_core::table::{Cell, Table};
use serde_json::json;

use super::{positive, Outcome};
use crate::config::{key, Key, Kind, Params};
use crate::error::{config_error, Result};
use crate::verdict::{Check, Verdict};

pub const SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed"),
    key("eps", Kind::Float, "0.25", "time-scale parameter in (0, 1]"),
    key("n", Kind::Count, "100000", "full-system particles"),
    key("dt", Kind::Float, "0.001", "Euler-Maruyama step"),
    key("t_end", Kind::Float, "50", "horizon; the final snapshot is the stationary sample"),
    key("bins", Kind::Count, "80", "conditioning bins over the central 99% of x"),
    key("min_count", Kind::Count, "100", "samples for a bin to be usable"),
    key("frozen_n", Kind::Count, "1000", "frozen-process particles per probe"),
    key("frozen_t", Kind::Float, "20", "frozen-process horizon"),
    key("frozen_burn", Kind::Float, "2", "frozen-process burn-in"),
    key("x_probes", Kind::FloatList, "-2,-1,0,1,2", "slow states for the averaged drift"),
    key("x_compare", Kind::Float, "1", "slow state where the two reductions are compared"),
    key("x_min", Kind::Float, "-3", "analytic table range"),
    key("x_max", Kind::Float, "3", "analytic table range"),
    key("x_points", Kind::Count, "61", "analytic table points"),
];

const SE_BAND: f64 = 3.0;
const SEPARATION: f64 = 5.0;

/// Sample covariance entries with the standard error of each, taken from
/// the spread of the centered products.
pub(crate) fn covariance_with_se(s: &Snapshot) -> Vec<(usize, usize, f64, f64)> {
    let (n, d) = (s.len(), s.dim());
    let mean = s.mean();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = s.rows().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).collect();
            let m = prods.iter().sum::<f64>() / n as f64;
            let var = prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (n as f64 - 1.0);
            out.push((i, j, m * n as f64 / (n as f64 - 1.0), (var / n as f64).sqrt()));
        }
    }
    out
}

pub fn run(p: &Params) -> Result<Outcome> {
    positive(p, &["eps", "dt", "t_end", "frozen_t"])?;
    let eps = p.float("eps");
    if eps > 1.0 {
        return config_error("eps must lie in (0, 1]");
    }
    let system = ou_counterexample(eps)?;
    let mut checks = Vec::new();

    // analytic block
    let lin = LinearSde::from_system(&system)?;
    let sigma = solve_lyapunov(lin.a(), lin.c())?;
    let mut cov_table = Table::new(&["i", "j", "value"]);
    for i in 0..2 {
        for j in 0..2 {
            cov_table.push(vec![Cell::U(i), Cell::U(j), Cell::F(sigma[(i, j)])]);
        }
    }
    let mut coef_table = Table::new(&["x", "ecd_mean", "ecd_var", "frozen_mean", "frozen_var", "averaged_drift", "projected_drift"]);
    let (x_min, x_max, x_points) = (p.float("x_min"), p.float("x_max"), p.count("x_points"));
    if !(x_max > x_min) || x_points < 2 {
        return config_error("analytic table needs x_max > x_min and at least two points");
    }
    let exact = |x: f64| -> Result<(f64, f64, f64, f64, f64, f64)> {
        let ecd = ecd_gaussian(&system, &[x])?;
        let frozen = frozen_stationary_law(&system, &[x])?;
        let fa = project_coefficients(&system, &ConditionalLaw::Gaussian(frozen.clone()), &[x])?.drift[0];
        let fp = project_coefficients(&system, &ConditionalLaw::Gaussian(ecd.clone()), &[x])?.drift[0];
        Ok((ecd.mean()[0], ecd.cov()[(0, 0)], frozen.mean()[0], frozen.cov()[(0, 0)], fa, fp))
    };
    for k in 0..x_points {
        let x = x_min + (x_max - x_min) * k as f64 / (x_points - 1) as f64;
        let (em, ev, fm, fv, fa, fp) = exact(x)?;
        coef_table.push(vec![Cell::F(x), Cell::F(em), Cell::F(ev), Cell::F(fm), Cell::F(fv), Cell::F(fa), Cell::F(fp)]);
    }

    // Monte Carlo: one stationary snapshot serves the covariance and the conditional law
    let cfg = IntegratorConfig::new(p.float("dt"), p.float("t_end"), p.count("n"), p.seed())?;
    let cfg = cfg.clone().with_record_every(cfg.n_steps())?;
    let snap = simulate_full(&system, &InitialCondition::Fixed(vec![0.0, 0.0]), &cfg)?.last().clone();
    let mut mc_cov = Table::new(&["i", "j", "estimate", "se", "exact"]);
    for (i, j, est, se) in covariance_with_se(&snap) {
        mc_cov.push(vec![Cell::U(i), Cell::U(j), Cell::F(est), Cell::F(se), Cell::F(sigma[(i, j)])]);
        checks.push(Check::within_se(format!("covariance[{i}][{j}]"), est, sigma[(i, j)], se, SE_BAND));
    }

    let binning = Binning { n_bins: p.count("bins"), min_count: p.count("min_count"), ..Binning::default() };
    let (xs, ys) = split_snapshot(&snap, 1);
    let est = conditional_statistics(&system, &xs, &ys, &binning)?;
    let mut bins = Table::new(&[
        "x_bin_center",
        "count",
        "usable",
        "mean_y",
        "mean_y_se",
        "var_y",
        "var_y_se",
        "projected_drift",
        "projected_drift_se",
        "exact_mean_y",
        "exact_var_y",
    ]);
    let (mut cx, mut cm, mut cs) = (Vec::new(), Vec::new(), Vec::new());
    let (mut pooled, mut dof) = (0.0, 0.0);
    for b in 0..est.n_bins() {
        let c = est.center(b);
        let (em, ev, ..) = exact(c)?;
        if !est.is_usable(b) {
            bins.push(vec![Cell::F(c), Cell::U(est.count(b)), Cell::B(false), Cell::F(f64::NAN), Cell::F(f64::NAN), Cell::F(f64::NAN), Cell::F(f64::NAN), Cell::F(f64::NAN), Cell::F(f64::NAN), Cell::F(em), Cell::F(ev)]);
            continue;
        }
        let n_b = est.count(b) as f64;
        let (m, m_se, v) = (est.mean_y(b)[0], est.se_mean_y(b)[0], est.cov_y(b)[0]);
        let v_se = v * (2.0 / (n_b - 1.0)).sqrt();
        let proj = project_coefficients(&system, &ConditionalLaw::Binned(&est), &[c])?;
        checks.push(Check::within_se(format!("projected_drift[x={c:.4}]"), proj.drift[0], exact(c)?.5, proj.drift_se[0], SE_BAND));
        bins.push(vec![Cell::F(c), Cell::U(est.count(b)), Cell::B(true), Cell::F(m), Cell::F(m_se), Cell::F(v), Cell::F(v_se), Cell::F(proj.drift[0]), Cell::F(proj.drift_se[0]), Cell::F(em), Cell::F(ev)]);
        cx.push(c);
        cm.push(m);
        cs.push(m_se);
        pooled += (n_b - 1.0) * v;
        dof += n_b - 1.0;
    }
    if cx.len() < 3 {
        return config_error("fewer than three usable bins; raise n or lower min_count");
    }
    let fit = weighted_line_fit(&cx, &cm, &cs);
    let exact_slope = exact(1.0)?.0 - exact(0.0)?.0;
    checks.push(Check::within_se("ecd_mean_slope", fit.slope, exact_slope, fit.slope_se, SE_BAND));
    let pooled_var = pooled / dof;
    let pooled_se = pooled_var * (2.0 / dof).sqrt();
    let exact_var = exact(0.0)?.1;
    checks.push(Check::within_se("ecd_variance", pooled_var, exact_var, pooled_se, SE_BAND));

    // averaged drift from time averages of the frozen fast process
    let fcfg = IntegratorConfig::new(p.float("dt"), p.float("frozen_t"), p.count("frozen_n"), p.seed())?.with_burn_in(p.float("frozen_burn"))?;
    let mut avg = Table::new(&["x", "averaged_drift", "se", "exact"]);
    let mut probes = p.floats("x_probes");
    let x_cmp = p.float("x_compare");
    if !probes.contains(&x_cmp) {
        probes.push(x_cmp);
    }
    let mut at_cmp = None;
    for &x in &probes {
        let c = average_coefficients(&system, &[x], &InitialCondition::Fixed(vec![0.0]), &fcfg)?;
        let target = exact(x)?.4;
        avg.push(vec![Cell::F(x), Cell::F(c.drift[0]), Cell::F(c.drift_se[0]), Cell::F(target)]);
        checks.push(Check::within_se(format!("averaged_drift[x={x}]"), c.drift[0], target, c.drift_se[0], SE_BAND));
        if x == x_cmp {
            at_cmp = Some((c.drift[0], c.drift_se[0]));
        }
    }
    let (fa, fa_se) = at_cmp.expect("comparison point is probed");
    // an empty bin at the comparison point is a failed comparison, not a crash
    let (fp, fp_se) = match project_coefficients(&system, &ConditionalLaw::Binned(&est), &[x_cmp]) {
        Ok(c) => (c.drift[0], c.drift_se[0]),
        Err(cgsde_core::Error::UnusableBin { .. }) => (f64::NAN, f64::NAN),
        Err(e) => return Err(e.into()),
    };
    let combined = (fa_se * fa_se + fp_se * fp_se).sqrt();
    let z = (fa - fp).abs() / combined;
    checks.push(Check::greater(format!("reductions_differ[x={x_cmp}]"), z, SEPARATION));

    let details = json!({
        "eps": eps,
        "stationary_covariance": [[sigma[(0, 0)], sigma[(0, 1)]], [sigma[(1, 0)], sigma[(1, 1)]]],
        "ecd_slope": {"estimate": fit.slope, "se": fit.slope_se, "exact": exact_slope},
        "ecd_variance": {"estimate": pooled_var, "se": pooled_se, "exact": exact_var},
        "comparison": {
            "x": x_cmp,
            "averaged": fa, "averaged_se": fa_se,
            "projected": fp, "projected_se": fp_se,
            "separation_in_se": z,
        },
        "usable_bins": est.n_usable(),
    });
    Ok(Outcome {
        tables: vec![
            ("analytic_covariance.csv".into(), cov_table),
            ("analytic_coefficients.csv".into(), coef_table),
            ("mc_covariance.csv".into(), mc_cov),
            ("ecd_bins.csv".into(), bins),
            ("averaged_drift.csv".into(), avg),
        ],
        verdict: Verdict::new("ou-triad", checks, details),
    })
}
