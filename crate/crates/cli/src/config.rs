//! Config documents, presets and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gittins_core::harness::table::{Column, Family, TableSpec};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableModel {
    pub family: Family,
    pub states: Vec<[f64; 2]>,
    pub gamma: f64,
    pub eps_trunc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSolver {
    pub columns: Vec<Column>,
    pub eps_nu: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub min_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRun {
    pub repetitions: usize,
    pub seed: u64,
    /// Write measured CPU seconds; off makes the CSV byte-reproducible.
    pub timing: bool,
}

/// Sectioned form of a [`TableSpec`] as read from config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub model: TableModel,
    pub solver: TableSolver,
    pub experiment: TableRun,
}

impl TableConfig {
    pub fn from_spec(s: &TableSpec) -> Self {
        TableConfig {
            model: TableModel {
                family: s.family,
                states: s.states.iter().map(|&(p, k)| [p, k]).collect(),
                gamma: s.gamma,
                eps_trunc: s.eps_trunc,
                horizon: s.horizon,
            },
            solver: TableSolver {
                columns: s.columns.clone(),
                eps_nu: s.eps_nu,
                beta: s.beta,
                max_iters: s.max_iters,
                min_iters: s.min_iters,
            },
            experiment: TableRun { repetitions: s.repetitions, seed: s.seed, timing: true },
        }
    }

    pub fn spec(&self) -> TableSpec {
        TableSpec {
            family: self.model.family,
            states: self.model.states.iter().map(|s| (s[0], s[1])).collect(),
            gamma: self.model.gamma,
            eps_trunc: self.model.eps_trunc,
            horizon: self.model.horizon,
            columns: self.solver.columns.clone(),
            eps_nu: self.solver.eps_nu,
            beta: self.solver.beta,
            max_iters: self.solver.max_iters,
            min_iters: self.solver.min_iters,
            repetitions: self.experiment.repetitions,
            seed: self.experiment.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<OutputFile>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` and returns its manifest entry.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<OutputFile, CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(OutputFile { path: path.to_path_buf(), sha256: sha256_hex(bytes) })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_manifest(out: &Path, m: &RunManifest) -> Result<(), CliError> {
    let path = manifest_path(out);
    let text = serde_json::to_string_pretty(m).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Merges `over` into `base`, recursing into tables.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Loads a config for a subcommand: a `.json` path is a previous run's
/// manifest whose resolved config is reused verbatim; anything else is a
/// TOML document layered over `defaults`.
pub fn load<T: Serialize + DeserializeOwned>(path: &Path, subcommand: &str, defaults: &T) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.subcommand != subcommand {
            return Err(CliError::Config(format!(
                "{} is a `{}` manifest, not `{subcommand}`",
                path.display(),
                m.subcommand
            )));
        }
        return serde_json::from_value(m.config).map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
    }
    let over: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut base = toml::Value::try_from(defaults).expect("defaults serialise to TOML");
    merge(&mut base, toml::Value::Table(over));
    // Errors here refer to the merged document, so report only the message,
    // which names the offending key.
    let merged = toml::to_string(&base).expect("merged config serialises");
    toml::from_str(&merged).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}
