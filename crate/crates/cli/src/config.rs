//! Flat key-value experiment configuration: schema defaults, then a config
//! file, then command-line overrides. Every value is type-checked against
//! the experiment's schema before anything runs.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    Count,
    Seed,
    FloatList,
    Choice(&'static [&'static str]),
}

/// One configurable parameter.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Key {
    Key { name, kind, default, help }
}

fn check_value(k: &Key, raw: &str) -> Result<()> {
    let bad = |what: &str| Err(CliError::Config(format!("{} = {raw:?}: expected {what}", k.name)));
    match k.kind {
        Kind::Float => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => bad("a finite number"),
        },
        Kind::Count => match raw.parse::<usize>() {
            Ok(v) if v > 0 => Ok(()),
            _ => bad("a positive integer"),
        },
        Kind::Seed => raw.parse::<u64>().map(|_| ()).or_else(|_| bad("an unsigned integer")),
        Kind::FloatList => {
            let ok = !raw.trim().is_empty() && raw.split(',').all(|p| p.trim().parse::<f64>().is_ok_and(f64::is_finite));
            if ok {
                Ok(())
            } else {
                bad("a comma-separated list of numbers")
            }
        }
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(())
            } else {
                bad(&format!("one of {}", options.join(", ")))
            }
        }
    }
}

/// Resolved parameters of one run, keyed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Defaults of `schema` overlaid with `overrides` in order; later pairs win.
    pub fn resolve(schema: &[Key], overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = schema.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        for (name, raw) in overrides {
            let k = schema
                .iter()
                .find(|k| k.name == name)
                .ok_or_else(|| CliError::Config(format!("unknown key {name:?}")))?;
            values.insert(name.clone(), raw.trim().to_string());
            check_value(k, raw.trim())?;
        }
        for k in schema {
            check_value(k, &values[k.name])?;
        }
        Ok(Self { values })
    }

    fn raw(&self, name: &str) -> &str {
        self.values.get(name).unwrap_or_else(|| panic!("parameter {name} is not in the schema"))
    }

    pub fn float(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated on resolve")
    }

    pub fn count(&self, name: &str) -> usize {
        self.raw(name).parse().expect("validated on resolve")
    }

    pub fn seed(&self) -> u64 {
        self.raw("seed").parse().expect("validated on resolve")
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        self.raw(name).split(',').map(|p| p.trim().parse().expect("validated on resolve")).collect()
    }

    pub fn choice(&self, name: &str) -> &str {
        self.raw(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `key = value` lines in key order; the hashed form of the config.
    pub fn canonical(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Reads `key = value` lines (blank lines and `#` comments skipped), or the
/// `params` object of a manifest written by a previous run.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let params = v
            .get("params")
            .and_then(|p| p.as_object())
            .ok_or_else(|| CliError::Config(format!("{}: no params object", path.display())))?;
        return params
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(CliError::Config(format!("{}: param {k} is not a string", path.display()))),
            })
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
