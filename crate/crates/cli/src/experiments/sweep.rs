//! Distance between the equilibrium conditional law and the frozen fast law
//! as the scale parameter shrinks, plus the pathwise gap between the
//! projected and averaged models driven by the same noise.

use std::f64::consts::SQRT_2;

use cgsde_core::coarse_grain::{ReducedKind, ReducedModel};
use cgsde_core::diagnostics::{ecd_epsilon_sweep, ecd_gaussian, ConditionalSource, SweepReport};
use cgsde_core::integrate::{run_particles, InitialCondition, IntegratorConfig, SdeModel};
use cgsde_core::model::SlowFastSystem;
use cgsde_core::stats::mean_se;
use cgsde_core::systems::{ou_counterexample, ou_noisy_slow};
use cgsde_core::table::{Cell, Table};
use serde_json::json;

use super::{positive, Outcome};
use crate::config::{key, Key, Kind, Params};
use crate::error::{config_error, Result};
use crate::verdict::{Check, Verdict};

pub const SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed for the pathwise check"),
    key("family", Kind::Choice(&["both", "example-2.2", "example-4.5"]), "both", "system family"),
    key("x", Kind::Float, "1", "slow state where the conditional laws are compared"),
    key("eps", Kind::FloatList, "0.4,0.2,0.1,0.05", "scale parameters"),
    key("paths", Kind::Count, "2000", "paths for the pathwise check"),
    key("path_t", Kind::Float, "10", "horizon of the pathwise check"),
    key("path_dt", Kind::Float, "0.001", "step of the pathwise check"),
    key("x0", Kind::Float, "1", "initial slow state of the pathwise check"),
];

/// Admissible fitted log-log slope for first-order convergence.
pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
/// Least reduction of the mean pathwise sup per halving of the scale.
pub const HALVING_FACTOR: f64 = 1.7;
/// Least distance at the smallest scale that counts as non-convergence.
pub const NON_CONVERGENCE_DISTANCE: f64 = 0.9;

/// Two scalar reduced models advanced with one shared Brownian increment.
struct CommonNoise<'a> {
    a: &'a ReducedModel,
    b: &'a ReducedModel,
}

impl SdeModel for CommonNoise<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn work_len(&self) -> usize {
        1
    }

    fn em_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        for (k, m) in [self.a, self.b].into_iter().enumerate() {
            let x = [z[k]];
            let s = m.diffusion(t, &x).map_or(f64::NAN, |s| s[(0, 0)]);
            if m.drift_into(t, &x, &mut work[..1]).is_err() {
                work[0] = f64::NAN;
            }
            z[k] += work[0] * dt + s * dw[0];
        }
    }
}

fn sweep_table(r: &SweepReport) -> Table {
    let mut t = Table::new(&["eps", "ecd_mean", "ecd_var", "frozen_mean", "frozen_var", "distance"]);
    for row in &r.rows {
        t.push(vec![Cell::F(row.eps), Cell::F(row.ecd_mean), Cell::F(row.ecd_var), Cell::F(row.frozen_mean), Cell::F(row.frozen_var), Cell::F(row.distance)]);
    }
    t
}

fn is_halving(a: f64, b: f64) -> bool {
    (a / b - 2.0).abs() <= 1e-9
}

/// Mean over paths of `sup_t |X_P - X_A|` for each scale, with its SE.
fn pathwise(p: &Params, eps_list: &[f64]) -> Result<Vec<(f64, f64, f64, f64)>> {
    let averaged = ReducedModel::scalar_linear(ReducedKind::Averaged, -1.0, 0.0, SQRT_2)?;
    let cfg = IntegratorConfig::new(p.float("path_dt"), p.float("path_t"), p.count("paths"), p.seed())?;
    let x0 = p.float("x0");
    let mut out = Vec::new();
    for &eps in eps_list {
        let system = ou_noisy_slow(eps)?;
        // projected drift is linear; its slope is read off the Gaussian conditional law
        let kappa = ecd_gaussian(&system, &[1.0])?.mean()[0];
        let projected = ReducedModel::scalar_linear(ReducedKind::Projected, -(1.0 - kappa), 0.0, SQRT_2)?;
        let sups = run_particles(
            &CommonNoise { a: &projected, b: &averaged },
            &InitialCondition::Fixed(vec![x0, x0]),
            &cfg,
            |_| 0.0f64,
            |acc: &mut f64, _, _, z| *acc = acc.max((z[0] - z[1]).abs()),
        )?;
        let (m, se) = mean_se(&sups);
        out.push((eps, kappa, m, se));
    }
    Ok(out)
}

pub fn run(p: &Params) -> Result<Outcome> {
    positive(p, &["path_t", "path_dt"])?;
    let eps_list = p.floats("eps");
    if eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return config_error("every eps must lie in (0, 1]");
    }
    let x = p.float("x");
    let family = p.choice("family");
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();

    if family != "example-2.2" {
        let r = ecd_epsilon_sweep(&|e| -> cgsde_core::Result<SlowFastSystem> { ou_noisy_slow(e) }, x, &eps_list, &ConditionalSource::Analytic)?;
        tables.push(("sweep_example-4.5.csv".to_string(), sweep_table(&r)));
        if let Some(s) = r.slope {
            checks.push(Check::in_range("example-4.5: distance slope", s, SLOPE_RANGE.0, SLOPE_RANGE.1));
        }
        let paths = pathwise(p, &eps_list)?;
        let mut pt = Table::new(&["eps", "kappa", "mean_sup_gap", "mean_sup_gap_se", "ratio_to_previous"]);
        for (k, &(eps, kappa, m, se)) in paths.iter().enumerate() {
            let ratio = if k == 0 { f64::NAN } else { paths[k - 1].2 / m };
            pt.push(vec![Cell::F(eps), Cell::F(kappa), Cell::F(m), Cell::F(se), Cell::F(ratio)]);
            if k > 0 && is_halving(paths[k - 1].0, eps) {
                checks.push(Check::at_least(format!("example-4.5: pathwise gap ratio eps {} -> {}", paths[k - 1].0, eps), ratio, HALVING_FACTOR));
            }
        }
        tables.push(("pathwise_example-4.5.csv".to_string(), pt));
        details.insert(
            "example-4.5".into(),
            json!({
                "slope": r.slope.map_or(json!("not applicable"), |s| json!(s)),
                "distances": r.rows.iter().map(|row| row.distance).collect::<Vec<_>>(),
                "pathwise_mean_sup": paths.iter().map(|q| q.2).collect::<Vec<_>>(),
                "pathwise_mean_sup_se": paths.iter().map(|q| q.3).collect::<Vec<_>>(),
                "convergence": if r.slope.is_some_and(|s| s > 0.0) { "converges" } else { "undetermined" },
            }),
        );
    }

    if family != "example-4.5" {
        let r = ecd_epsilon_sweep(&|e| -> cgsde_core::Result<SlowFastSystem> { ou_counterexample(e) }, x, &eps_list, &ConditionalSource::Analytic)?;
        tables.push(("sweep_example-2.2.csv".to_string(), sweep_table(&r)));
        let smallest = r.rows.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)).expect("non-empty list");
        checks.push(Check::at_least(format!("example-2.2: distance at eps {}", smallest.eps), smallest.distance, NON_CONVERGENCE_DISTANCE));
        let floor = r.rows.iter().map(|row| row.distance).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("example-2.2: smallest distance vs |x|", floor, x.abs()));
        details.insert(
            "example-2.2".into(),
            json!({
                "slope": r.slope.map_or(json!("not applicable"), |s| json!(s)),
                "distances": r.rows.iter().map(|row| row.distance).collect::<Vec<_>>(),
                "convergence": if floor >= x.abs() { "no convergence" } else { "undetermined" },
            }),
        );
    }
    Ok(Outcome { tables, verdict: Verdict::new("eps-sweep", checks, serde_json::Value::Object(details)) })
}
