//! Writes the CSV tables, `verdict.json` and `manifest.json` of a run.
//! Nothing time- or host-dependent goes into the files, so a rerun from the
//! manifest reproduces every CSV byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Params;
use crate::error::Result;
use crate::experiments::{Experiment, Outcome};

#[derive(Debug, Serialize)]
pub struct Versions {
    pub cgsde: &'static str,
    pub cgsde_core: &'static str,
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    /// SHA-256 of the canonical `key = value` form of `params`.
    pub config_hash: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub versions: Versions,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(experiment: Experiment, params: &Params, outputs: Vec<OutputFile>) -> Manifest {
    Manifest {
        experiment: experiment.id().to_string(),
        config_hash: sha256_hex(params.canonical().as_bytes()),
        seed: params.seed(),
        params: params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        versions: Versions { cgsde: env!("CARGO_PKG_VERSION"), cgsde_core: cgsde_core::VERSION },
        outputs,
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<OutputFile>) -> Result<()> {
    fs::write(dir.join(name), bytes)?;
    outputs.push(OutputFile { name: name.to_string(), sha256: sha256_hex(bytes) });
    Ok(())
}

/// Creates `dir` if needed and writes the tables, the verdict and the
/// manifest (which lists the other files with their hashes).
pub fn write_outputs(dir: &Path, experiment: Experiment, params: &Params, outcome: &Outcome) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    for (name, table) in &outcome.tables {
        write(dir, name, table.to_csv().as_bytes(), &mut outputs)?;
    }
    let verdict = serde_json::to_string_pretty(&outcome.verdict).expect("verdict serializes") + "\n";
    write(dir, "verdict.json", verdict.as_bytes(), &mut outputs)?;
    let m = manifest(experiment, params, outputs);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n")?;
    Ok(m)
}
