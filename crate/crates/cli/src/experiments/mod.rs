//! The registered experiments. Each one resolves its parameters, computes
//! its tables and returns a verdict; writing files is left to the caller.

use cgsde_core::table::Table;

use crate::config::{Key, Params};
use crate::error::{config_error, Result};
use crate::verdict::Verdict;

mod audit;
mod figures;
mod gyongy;
mod prop41;
mod sweep;
mod triad;

/// Tables (by file name) and the verdict of one run.
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    OuTriad,
    GyongyBinned,
    Fig2,
    Fig3,
    Fig4,
    Prop41,
    EpsSweep,
    ConditionAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::OuTriad,
        Experiment::GyongyBinned,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Prop41,
        Experiment::EpsSweep,
        Experiment::ConditionAudit,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::OuTriad => "ou-triad",
            Experiment::GyongyBinned => "gyongy-binned",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Prop41 => "prop41",
            Experiment::EpsSweep => "eps-sweep",
            Experiment::ConditionAudit => "condition-audit",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::OuTriad => "planar OU counterexample: covariance, conditional law, averaged vs projected drift",
            Experiment::GyongyBinned => "binned mimicking drift from a full-system ensemble vs the closed form",
            Experiment::Fig2 => "mimicking-model ensemble mean and variance over time",
            Experiment::Fig3 => "histogram of the mimicking model at the final time",
            Experiment::Fig4 => "sample paths of the mimicking and projected models",
            Experiment::Prop41 => "Fokker-Planck residual test of conditional-law coincidence",
            Experiment::EpsSweep => "conditional-law distance and pathwise error as the scale shrinks",
            Experiment::ConditionAudit => "ellipticity, Lyapunov, obtuse-angle and coefficient-limit audits",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match Self::ALL.iter().find(|e| e.id() == id) {
            Some(e) => Ok(*e),
            None => {
                let known: Vec<&str> = Self::ALL.iter().map(|e| e.id()).collect();
                config_error(format!("unknown experiment {id:?}; known: {}", known.join(", ")))
            }
        }
    }

    pub fn schema(self) -> &'static [Key] {
        match self {
            Experiment::OuTriad => triad::SCHEMA,
            Experiment::GyongyBinned => gyongy::SCHEMA,
            Experiment::Fig2 => figures::FIG2_SCHEMA,
            Experiment::Fig3 => figures::FIG3_SCHEMA,
            Experiment::Fig4 => figures::FIG4_SCHEMA,
            Experiment::Prop41 => prop41::SCHEMA,
            Experiment::EpsSweep => sweep::SCHEMA,
            Experiment::ConditionAudit => audit::SCHEMA,
        }
    }

    pub fn resolve(self, overrides: &[(String, String)]) -> Result<Params> {
        Params::resolve(self.schema(), overrides)
    }

    pub fn run(self, p: &Params) -> Result<Outcome> {
        match self {
            Experiment::OuTriad => triad::run(p),
            Experiment::GyongyBinned => gyongy::run(p),
            Experiment::Fig2 => figures::run_fig2(p),
            Experiment::Fig3 => figures::run_fig3(p),
            Experiment::Fig4 => figures::run_fig4(p),
            Experiment::Prop41 => prop41::run(p),
            Experiment::EpsSweep => sweep::run(p),
            Experiment::ConditionAudit => audit::run(p),
        }
    }
}

/// Resolves `overrides` against the schema of `id` and runs it.
pub fn run_with(id: &str, overrides: &[(&str, &str)]) -> Result<Outcome> {
    let e = Experiment::parse(id)?;
    let pairs: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    e.run(&e.resolve(&pairs)?)
}

fn positive(p: &Params, names: &[&str]) -> Result<()> {
    for n in names {
        if !(p.float(n) > 0.0) {
            return config_error(format!("{n} must be positive"));
        }
    }
    Ok(())
}
