//! Ensembles of the closed-form mimicking model of the planar
//! counterexample: moments over time, the final-time histogram, and a few
//! sample paths next to the (constant) projected paths.

use cgsde_core::coarse_grain::{simulate_reduced, ReducedKind, ReducedModel};
use cgsde_core::integrate::{InitialCondition, IntegratorConfig};
use cgsde_core::linear_gaussian::{ou_moments, planar_counterexample, PlanarInitialLaw};
use cgsde_core::model::GaussianMeasure;
use cgsde_core::stats::{mean_se, variance_se};
use cgsde_core::table::{Cell, Table};
use serde_json::json;

use super::{positive, Outcome};
use crate::config::{key, Key, Kind, Params};
use crate::error::{config_error, Result};
use crate::verdict::{Check, Verdict};

const SE_BAND: f64 = 3.0;

pub const FIG2_SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed"),
    key("n", Kind::Count, "100000", "particles"),
    key("t_end", Kind::Float, "20", "horizon"),
    key("dt_out", Kind::Float, "0.5", "output spacing"),
    key("mean_x0", Kind::Float, "-1", "initial slow mean"),
    key("var_x0", Kind::Float, "0.1", "initial slow variance (must be positive)"),
    key("mean_y0", Kind::Float, "5", "initial fast mean"),
    key("var_y0", Kind::Float, "1", "initial fast variance"),
];

pub const FIG3_SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed"),
    key("n", Kind::Count, "100000", "particles"),
    key("t_eval", Kind::Float, "20", "evaluation time"),
    key("bins", Kind::Count, "50", "histogram bins over the sample range"),
    key("mean_x0", Kind::Float, "-1", "initial slow mean"),
    key("var_x0", Kind::Float, "0.1", "initial slow variance (must be positive)"),
    key("mean_y0", Kind::Float, "5", "initial fast mean"),
    key("var_y0", Kind::Float, "1", "initial fast variance"),
];

pub const FIG4_SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed"),
    key("paths", Kind::Count, "10", "paths per panel"),
    key("t_end", Kind::Float, "20", "horizon"),
    key("dt_out", Kind::Float, "0.1", "output spacing"),
    key("mean_x0", Kind::Float, "-1", "initial slow mean"),
    key("var_x0_narrow", Kind::Float, "0.1", "initial slow variance, first panel"),
    key("var_x0_wide", Kind::Float, "10", "initial slow variance, second panel"),
    key("mean_y0", Kind::Float, "5", "initial fast mean"),
    key("var_y0", Kind::Float, "1", "initial fast variance"),
];

/// The planar initial law with slow variance `var_x`. A degenerate slow
/// variance is refused: the mimicking drift needs `Cov(X_t, Y_t) / Var(X_t)`,
/// which is 0/0 at `t = 0` and blows up as `t` tends to zero.
pub(crate) fn initial_law(p: &Params, var_x: f64) -> Result<PlanarInitialLaw> {
    if !(var_x > 0.0) {
        return config_error(format!(
            "initial slow variance {var_x} is not positive: the mimicking drift Cov(X_t,Y_t)/Var(X_t) is singular at t = 0 and blows up as t tends to zero"
        ));
    }
    let (mx, my, vy) = (p.float("mean_x0"), p.float("mean_y0"), p.float("var_y0"));
    if !(vy >= 0.0) {
        return config_error("var_y0 must be non-negative");
    }
    Ok(PlanarInitialLaw::new(mx, my, var_x, vy)?)
}

/// Exact slow marginal `(m_t, Sigma_t^xx)` of the full planar system.
fn exact_marginal(init: &PlanarInitialLaw, t: f64) -> Result<(f64, f64)> {
    let g0 = init.measure();
    let g = ou_moments(&planar_counterexample(), g0.mean(), g0.cov(), t)?;
    Ok((g.mean()[0], g.cov()[(0, 0)]))
}

fn slow_start(init: &PlanarInitialLaw) -> Result<InitialCondition> {
    Ok(InitialCondition::Gaussian(GaussianMeasure::scalar(init.mean_x, init.var_x)?))
}

pub fn run_fig2(p: &Params) -> Result<Outcome> {
    positive(p, &["t_end", "dt_out"])?;
    let init = initial_law(p, p.float("var_x0"))?;
    let t_end = p.float("t_end");
    let model = ReducedModel::gyongy_planar(init, t_end)?;
    let cfg = IntegratorConfig::new(p.float("dt_out"), t_end, p.count("n"), p.seed())?;
    let traj = simulate_reduced(&model, &slow_start(&init)?, &cfg)?;

    let mut table = Table::new(&["t", "mean", "mean_se", "variance", "variance_se", "exact_mean", "exact_variance"]);
    let mut checks = Vec::new();
    for (k, &t) in traj.times().iter().enumerate() {
        let col = traj.snapshot(k).column(0);
        let (m, m_se) = mean_se(&col);
        let (v, v_se) = variance_se(&col);
        let (em, ev) = exact_marginal(&init, t)?;
        table.push(vec![Cell::F(t), Cell::F(m), Cell::F(m_se), Cell::F(v), Cell::F(v_se), Cell::F(em), Cell::F(ev)]);
        checks.push(Check::within_se(format!("mean[t={t}]"), m, em, m_se, SE_BAND));
        checks.push(Check::within_se(format!("variance[t={t}]"), v, ev, v_se, SE_BAND));
    }
    let details = json!({"times": traj.times().len(), "n": p.count("n")});
    Ok(Outcome { tables: vec![("moments.csv".into(), table)], verdict: Verdict::new("fig2", checks, details) })
}

pub fn run_fig3(p: &Params) -> Result<Outcome> {
    positive(p, &["t_eval"])?;
    let init = initial_law(p, p.float("var_x0"))?;
    let t = p.float("t_eval");
    let n = p.count("n");
    if n < 2 {
        return config_error("need at least two particles");
    }
    let model = ReducedModel::gyongy_planar(init, t)?;
    let cfg = IntegratorConfig::new(t, t, n, p.seed())?;
    let xs = simulate_reduced(&model, &slow_start(&init)?, &cfg)?.last().column(0);
    let (em, ev) = exact_marginal(&init, t)?;

    let bins = p.count("bins");
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut hist = Table::new(&["bin_left", "bin_right", "bin_center", "count", "density", "reference_density"]);
    let reference = GaussianMeasure::scalar(em, ev)?;
    for (b, c) in counts.iter().enumerate() {
        let (l, r) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let mid = 0.5 * (l + r);
        hist.push(vec![
            Cell::F(l),
            Cell::F(r),
            Cell::F(mid),
            Cell::U(*c),
            Cell::F(*c as f64 / (n as f64 * width)),
            Cell::F(reference.pdf(&[mid])?),
        ]);
    }

    let (m, _) = mean_se(&xs);
    let (v, _) = variance_se(&xs);
    // bands from the reference law, not the sample
    let m_se = (ev / n as f64).sqrt();
    let v_se = (2.0 * ev * ev / n as f64).sqrt();
    let mut moments = Table::new(&["t", "n", "sample_mean", "sample_variance", "reference_mean", "reference_variance", "mean_se", "variance_se"]);
    moments.push(vec![Cell::F(t), Cell::U(n), Cell::F(m), Cell::F(v), Cell::F(em), Cell::F(ev), Cell::F(m_se), Cell::F(v_se)]);
    let checks = vec![
        Check::within_se("sample_mean", m, em, m_se, SE_BAND),
        Check::within_se("sample_variance", v, ev, v_se, SE_BAND),
    ];
    let details = json!({"t": t, "reference": {"mean": em, "variance": ev}});
    Ok(Outcome {
        tables: vec![("histogram.csv".into(), hist), ("moments.csv".into(), moments)],
        verdict: Verdict::new("fig3", checks, details),
    })
}

pub fn run_fig4(p: &Params) -> Result<Outcome> {
    positive(p, &["t_end", "dt_out"])?;
    let t_end = p.float("t_end");
    let n = p.count("paths");
    if n < 2 {
        return config_error("need at least two paths per panel");
    }
    let projected = ReducedModel::scalar_linear(ReducedKind::Projected, 0.0, 0.0, 0.0)?;
    let cfg = IntegratorConfig::new(p.float("dt_out"), t_end, n, p.seed())?;
    let mut table = Table::new(&["panel_var_x0", "path", "t", "x_gyongy", "x_projected"]);
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    for (panel, name) in [("var_x0_narrow", "narrow"), ("var_x0_wide", "wide")] {
        let var_x0 = p.float(panel);
        let init = initial_law(p, var_x0)?;
        let start = slow_start(&init)?;
        let g = simulate_reduced(&ReducedModel::gyongy_planar(init, t_end)?, &start, &cfg)?;
        let pr = simulate_reduced(&projected, &start, &cfg)?;
        let mut drift_from_start = 0.0f64;
        for path in 0..n {
            let x0 = pr.snapshot(0).row(path)[0];
            for (k, &t) in g.times().iter().enumerate() {
                let (xg, xp) = (g.snapshot(k).row(path)[0], pr.snapshot(k).row(path)[0]);
                drift_from_start = drift_from_start.max((xp - x0).abs());
                table.push(vec![Cell::F(var_x0), Cell::U(path), Cell::F(t), Cell::F(xg), Cell::F(xp)]);
            }
        }
        checks.push(Check::within(format!("{name}: projected paths constant"), drift_from_start, 0.0, 0.0));
        let start_gap = (0..n).map(|i| (g.snapshot(0).row(i)[0] - pr.snapshot(0).row(i)[0]).abs()).fold(0.0, f64::max);
        checks.push(Check::within(format!("{name}: common initial values"), start_gap, 0.0, 0.0));

        let (v0, _) = variance_se(&g.snapshot(0).column(0));
        let (v1, _) = variance_se(&g.last().column(0));
        let (_, target) = exact_marginal(&init, t_end)?;
        // endpoint spread moves toward the asymptotic slow variance
        checks.push(Check::less(format!("{name}: endpoint variance gap to exact"), (v1 - target).abs(), (v0 - target).abs()));
        if var_x0 < target {
            checks.push(Check::greater(format!("{name}: endpoint variance inflates"), v1, var_x0));
        } else {
            checks.push(Check::less(format!("{name}: endpoint variance deflates"), v1, v0));
        }
        details.insert(name.into(), json!({"var_x0": var_x0, "initial_sample_variance": v0, "endpoint_sample_variance": v1, "exact_endpoint_variance": target}));
    }
    Ok(Outcome { tables: vec![("paths.csv".into(), table)], verdict: Verdict::new("fig4", checks, serde_json::Value::Object(details)) })
}
