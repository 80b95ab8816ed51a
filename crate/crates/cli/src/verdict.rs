//! Pass/fail checks that always carry the numbers they were decided on.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The decision rule in words, e.g. `|value - target| <= 3 se`.
    pub rule: String,
    pub value: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub se: Option<f64>,
}

impl Check {
    /// `|value - target| <= k * se`.
    pub fn within_se(name: impl Into<String>, value: f64, target: f64, se: f64, k: f64) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= k * se,
            rule: format!("|value - target| <= {k} se"),
            value,
            target: Some(target),
            tolerance: Some(k),
            se: Some(se),
        }
    }

    /// `|value - target| <= tol`.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= tol,
            rule: "|value - target| <= tolerance".into(),
            value,
            target: Some(target),
            tolerance: Some(tol),
            se: None,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value <= bound, rule: "value <= tolerance".into(), value, target: None, tolerance: Some(bound), se: None }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value >= bound, rule: "value >= tolerance".into(), value, target: None, tolerance: Some(bound), se: None }
    }

    pub fn greater(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value > bound, rule: "value > tolerance".into(), value, target: None, tolerance: Some(bound), se: None }
    }

    pub fn less(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value < bound, rule: "value < tolerance".into(), value, target: None, tolerance: Some(bound), se: None }
    }

    pub fn in_range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            passed: (lo..=hi).contains(&value),
            rule: format!("{lo} <= value <= {hi}"),
            value,
            target: Some(0.5 * (lo + hi)),
            tolerance: Some(0.5 * (hi - lo)),
            se: None,
        }
    }

    /// An observed yes/no outcome against the expected one; `value` is the
    /// witnessing number and `rule` says how the outcome was decided.
    pub fn outcome(name: impl Into<String>, observed: bool, expected: bool, value: f64, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: observed == expected,
            rule: format!("{} (expected to {})", rule.into(), if expected { "hold" } else { "fail" }),
            value,
            target: None,
            tolerance: None,
            se: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Experiment-specific numbers that are not checks (reports, labels).
    pub details: serde_json::Value,
}

impl Verdict {
    pub fn new(experiment: &str, checks: Vec<Check>, details: serde_json::Value) -> Self {
        Self { experiment: experiment.to_string(), passed: checks.iter().all(|c| c.passed), checks, details }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
