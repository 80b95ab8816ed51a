//! Does the frozen fast law coincide with the conditional equilibrium law?
//! Decided from Fokker-Planck residuals of `exp(-V)` on a grid.

use cgsde_core::diagnostics::{check_prop41, Decay, Prop41Norms, Prop41Report, Prop41Verdict, NON_DECAY_FRACTION, SECOND_ORDER_RANGE};
use cgsde_core::model::{GridDensity2D, SlowFastSystem, UniformGrid};
use cgsde_core::systems::{gradient_system, j_block_system, symplectic_system, Potential};
use cgsde_core::table::{Cell, Table};
use serde_json::json;

use super::{positive, Outcome};
use crate::config::{key, Key, Kind, Params};
use crate::error::Result;
use crate::verdict::{Check, Verdict};

pub const SCHEMA: &[Key] = &[
    key("seed", Kind::Seed, "42", "unused; kept for a uniform manifest"),
    key("example", Kind::Choice(&["all", "gradient", "j-block", "symplectic"]), "all", "system built from V"),
    key("v_a", Kind::Float, "1", "V = a x^2/2 + b y^2/2 + c x y"),
    key("v_b", Kind::Float, "1", "V = a x^2/2 + b y^2/2 + c x y"),
    key("v_c", Kind::Float, "0.5", "V = a x^2/2 + b y^2/2 + c x y"),
    key("n", Kind::Count, "201", "grid nodes per axis (odd)"),
    key("half_width", Kind::Float, "5", "window [-L, L]^2"),
    key("tol", Kind::Float, "0.01", "residual sup-norm tolerance for the coincide verdict"),
];

fn norms_row(t: &mut Table, example: &str, resolution: &str, n: &Prop41Norms) {
    t.push(vec![
        Cell::S(example.into()),
        Cell::S(resolution.into()),
        Cell::F(n.h_x),
        Cell::F(n.h_y),
        Cell::F(n.slow_cross.sup),
        Cell::F(n.slow_cross.l2),
        Cell::F(n.fast.sup),
        Cell::F(n.fast.l2),
        Cell::F(n.full.sup),
        Cell::F(n.full.l2),
    ]);
}

fn decay_json(d: &Decay) -> serde_json::Value {
    json!({"ratio": d.ratio, "second_order": d.second_order, "non_decaying": d.non_decaying})
}

fn report_json(r: &Prop41Report) -> serde_json::Value {
    json!({
        "verdict": r.verdict.as_str(),
        "x_window": [r.x_window.0, r.x_window.1],
        "y_window": [r.y_window.0, r.y_window.1],
        "tol": r.tol,
        "slow_plus_cross": {"fine_sup": r.fine.slow_cross.sup, "fine_l2": r.fine.slow_cross.l2, "coarse_sup": r.coarse.slow_cross.sup, "decay": decay_json(&r.slow_cross_decay)},
        "fast": {"fine_sup": r.fine.fast.sup, "fine_l2": r.fine.fast.l2, "coarse_sup": r.coarse.fast.sup, "decay": decay_json(&r.fast_decay)},
        "full": {"fine_sup": r.fine.full.sup, "fine_l2": r.fine.full.l2, "coarse_sup": r.coarse.full.sup, "decay": decay_json(&r.full_decay)},
        "min_marginal": r.min_marginal,
        "warning": r.warning,
    })
}

fn second_order(name: String, d: &Decay) -> Check {
    Check::in_range(name, d.ratio, SECOND_ORDER_RANGE.0, SECOND_ORDER_RANGE.1)
}

pub fn run(p: &Params) -> Result<Outcome> {
    positive(p, &["half_width", "tol"])?;
    let v = Potential::quadratic(p.float("v_a"), p.float("v_b"), p.float("v_c"));
    let l = p.float("half_width");
    let g = UniformGrid::new(-l, l, p.count("n"))?;
    let rho = GridDensity2D::from_fn(g, g, |x, y| v.gibbs(x, y))?.normalize_density()?;
    let examples: Vec<(&str, SlowFastSystem, Prop41Verdict)> = [
        ("gradient", gradient_system(&v), Prop41Verdict::Coincide),
        ("j-block", j_block_system(&v), Prop41Verdict::Coincide),
        ("symplectic", symplectic_system(&v), Prop41Verdict::DoNotCoincide),
    ]
    .into_iter()
    .filter(|(name, ..)| p.choice("example") == "all" || p.choice("example") == *name)
    .collect();

    let mut table = Table::new(&["example", "resolution", "h_x", "h_y", "slow_cross_sup", "slow_cross_l2", "fast_sup", "fast_l2", "full_sup", "full_l2"]);
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    for (name, system, expected) in examples {
        let r = check_prop41(&rho, &system, p.float("tol"))?;
        norms_row(&mut table, name, "fine", &r.fine);
        norms_row(&mut table, name, "coarse", &r.coarse);
        let worst = r.fine.slow_cross.sup.max(r.fine.fast.sup);
        checks.push(Check::outcome(
            format!("{name}: verdict"),
            r.verdict == Prop41Verdict::Coincide,
            expected == Prop41Verdict::Coincide,
            worst,
            format!("coincide iff max fine sup residual <= {}", r.tol),
        ));
        match expected {
            Prop41Verdict::Coincide => {
                checks.push(second_order(format!("{name}: slow+cross residual decay"), &r.slow_cross_decay));
                checks.push(second_order(format!("{name}: fast residual decay"), &r.fast_decay));
            }
            Prop41Verdict::DoNotCoincide => {
                // fine >= NON_DECAY_FRACTION * coarse, i.e. coarse/fine <= 1 / NON_DECAY_FRACTION
                checks.push(Check::at_most(format!("{name}: fast residual does not decay"), r.fast_decay.ratio, 1.0 / NON_DECAY_FRACTION));
            }
        }
        details.insert(name.into(), report_json(&r));
    }
    Ok(Outcome { tables: vec![("prop41_residuals.csv".into(), table)], verdict: Verdict::new("prop41", checks, serde_json::Value::Object(details)) })
}
