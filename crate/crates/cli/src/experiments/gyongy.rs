//! Binned mimicking drift at one time from a full-system ensemble, against
//! the closed form for the planar counterexample.

use cgsde_core::coarse_grain::gyongy_coefficients;
use cgsde_core::integrate::{simulate_full, InitialCondition, IntegratorConfig};
use cgsde_core::linear_gaussian::gyongy_drift_linear;
use cgsde_core::model::Binning;
use cgsde_core::systems::planar_ou;
use cgsde_core::table::{Cell, Table};
use serde_json::json;

use super::figures::initial_law;
use super::{positive, Outcome};
use crate::config::{key, Key, Kind, Params};
use crate::error::Result;
use crate::verdict::{Check, Verdict};

pub const SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "random seed"),
    key("n", Kind::Count, "100000", "full-system particles"),
    key("dt", Kind::Float, "0.001", "Euler-Maruyama step"),
    key("t", Kind::Float, "1", "evaluation time"),
    key("bins", Kind::Count, "40", "bins over the central 99% of x"),
    key("min_count", Kind::Count, "200", "samples for a bin to be compared"),
    key("mean_x0", Kind::Float, "-1", "initial slow mean"),
    key("var_x0", Kind::Float, "0.1", "initial slow variance"),
    key("mean_y0", Kind::Float, "5", "initial fast mean"),
    key("var_y0", Kind::Float, "1", "initial fast variance"),
];

const SE_BAND: f64 = 3.0;

pub fn run(p: &Params) -> Result<Outcome> {
    positive(p, &["dt", "t"])?;
    let init = initial_law(p, p.float("var_x0"))?;
    let t = p.float("t");
    let cfg = IntegratorConfig::new(p.float("dt"), t, p.count("n"), p.seed())?;
    let cfg = cfg.clone().with_record_every(cfg.n_steps())?;
    let system = planar_ou();
    let snap = simulate_full(&system, &InitialCondition::Gaussian(init.measure()), &cfg)?.last().clone();
    let binning = Binning { n_bins: p.count("bins"), min_count: p.count("min_count"), ..Binning::default() };
    let table = gyongy_coefficients(&system, t, &snap, &binning)?;

    let mut out = Table::new(&["t", "x_bin_center", "count", "usable", "drift", "drift_se", "exact"]);
    let mut checks = Vec::new();
    for i in 0..table.centers.len() {
        let c = table.centers[i];
        let exact = gyongy_drift_linear(t, c, &init)?;
        out.push(vec![
            Cell::F(t),
            Cell::F(c),
            Cell::U(table.counts[i]),
            Cell::B(table.usable[i]),
            Cell::F(table.drift[i]),
            Cell::F(table.drift_se[i]),
            Cell::F(exact),
        ]);
        if table.usable[i] {
            checks.push(Check::within_se(format!("drift[x={c:.4}]"), table.drift[i], exact, table.drift_se[i], SE_BAND));
        }
    }
    let compared = checks.len();
    checks.push(Check::at_least("compared_bins", compared as f64, 1.0));
    let details = json!({"t": t, "compared_bins": compared, "min_count": binning.min_count});
    Ok(Outcome { tables: vec![("gyongy_drift.csv".into(), out)], verdict: Verdict::new("gyongy-binned", checks, details) })
}
