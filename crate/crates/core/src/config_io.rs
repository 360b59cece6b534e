//! Experiment configuration files and run artifacts.
//!
//! Experiments are described by a single JSON config (system, arrival
//! rate(s), seed, horizons, sizes). Runs write their products — CSV tables
//! and JSON reports — into an output directory together with a
//! `manifest.json` listing every file with its SHA-256 checksum, written
//! last so a complete manifest marks a complete run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RreError};
use crate::model::{RawSystem, SystemModel};

/// Environment variable consulted for the output root when neither the
/// command line nor the config names an output directory.
pub const OUTPUT_ROOT_ENV: &str = "RRE_OUTPUT_ROOT";

/// Fallback output root when [`OUTPUT_ROOT_ENV`] is unset.
pub const DEFAULT_OUTPUT_ROOT: &str = "rre-out";

/// The system a config runs on: a path to a system JSON file (resolved
/// relative to the config file) or the matrices written inline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SystemSpec {
    Path { path: PathBuf },
    Inline(RawSystem),
}

/// One arrival probability or a list of them (studies sweep over lists).
/// Commands that simulate require at least one value; structural commands
/// (fixed-point, support, critical bounds) ignore it, so it may be absent.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GammaSpec {
    Single(f64),
    List(Vec<f64>),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::List(Vec::new())
    }
}

impl GammaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GammaSpec::Single(g) => vec![*g],
            GammaSpec::List(gs) => gs.clone(),
        }
    }
}

fn default_seed() -> u64 {
    0
}
fn default_horizon() -> usize {
    1_000
}
fn default_burn_in() -> usize {
    crate::simulator::DEFAULT_BURN_IN
}
fn default_replicates() -> usize {
    1_000
}
fn default_depth() -> usize {
    crate::support::DEFAULT_DEPTH
}

/// A complete experiment description. Unknown keys are rejected so typos
/// fail loudly instead of silently running defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub gamma_bar: GammaSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Checks every field and reports all problems at once. Arrival-rate
    /// presence and `burn_in < horizon` are enforced by the commands that
    /// use them (structural commands need neither).
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for g in &self.gamma_bar.values() {
            if !(0.0..=1.0).contains(g) || !g.is_finite() {
                problems.push(format!("gamma_bar entries must lie in [0, 1], got {g}"));
            }
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if self.replicates == 0 {
            problems.push("replicates must be at least 1".to_string());
        }
        if let SystemSpec::Path { path } = &self.system {
            if path.as_os_str().is_empty() {
                problems.push("system path must not be empty".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(RreError::Validation(problems))
        }
    }

    /// Loads and parses the referenced system. Relative paths are taken
    /// relative to the directory of the config file (`base_dir`).
    pub fn resolve_system(&self, base_dir: &Path) -> Result<SystemModel> {
        match &self.system {
            SystemSpec::Inline(raw) => raw.clone().try_into(),
            SystemSpec::Path { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let text = fs::read_to_string(&full).map_err(|source| RreError::Io {
                    path: full.clone(),
                    source,
                })?;
                let raw: RawSystem =
                    serde_json::from_str(&text).map_err(|source| RreError::Json {
                        origin: full.display().to_string(),
                        source,
                    })?;
                raw.try_into()
            }
        }
    }
}

/// Reads, parses, and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| RreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| RreError::Json {
        origin: path.display().to_string(),
        source,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes a config as pretty-printed JSON.
pub fn save_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg).map_err(|source| RreError::Json {
        origin: "config serialization".into(),
        source,
    })?;
    write_bytes(path, text.as_bytes())
}

/// Formats a float for CSV output with 17 significant digits, enough to
/// round-trip an `f64` exactly.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One data product of a run.
#[derive(Debug, Clone)]
pub enum OutputPayload {
    /// Rows are pre-formatted cells; use [`csv_float`] for floats.
    Csv {
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Json(serde_json::Value),
}

impl OutputPayload {
    fn render(&self) -> Result<Vec<u8>> {
        match self {
            OutputPayload::Csv { header, rows } => {
                let mut text = header.join(",");
                text.push('\n');
                for row in rows {
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                Ok(text.into_bytes())
            }
            OutputPayload::Json(value) => {
                let mut text =
                    serde_json::to_string_pretty(value).map_err(|source| RreError::Json {
                        origin: "output serialization".into(),
                        source,
                    })?;
                text.push('\n');
                Ok(text.into_bytes())
            }
        }
    }
}

/// A file-name / payload pair destined for the output directory.
#[derive(Debug, Clone)]
pub struct NamedOutput {
    pub name: String,
    pub payload: OutputPayload,
}

/// Entry of the manifest: one written file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Run manifest, written last.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub tool_version: String,
    /// Checksum of the `config.json` snapshot next to the outputs.
    pub config_sha256: String,
    pub outputs: Vec<OutputRecord>,
    pub timings_ms: BTreeMap<String, u64>,
}

/// Picks the output directory: explicit flag, then the config's
/// `output_dir`, then `$RRE_OUTPUT_ROOT/<run name>`, then
/// `rre-out/<run name>`.
pub fn resolve_output_dir(
    flag: Option<&Path>,
    config_dir: Option<&Path>,
    run_name: &str,
) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config_dir {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
    root.join(run_name)
}

/// Writes the config snapshot and all outputs into `dir`, then the manifest
/// (last). Returns the manifest. Existing files are overwritten — runs are
/// deterministic in their inputs, so a rerun writes identical data.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outputs: &[NamedOutput],
    timings_ms: BTreeMap<String, u64>,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|source| RreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let config_text = serde_json::to_string_pretty(cfg).map_err(|source| RreError::Json {
        origin: "config serialization".into(),
        source,
    })?;
    let config_bytes = {
        let mut b = config_text.into_bytes();
        b.push(b'\n');
        b
    };
    write_bytes(&dir.join("config.json"), &config_bytes)?;

    let mut records = Vec::with_capacity(outputs.len());
    for output in outputs {
        let bytes = output.payload.render()?;
        write_bytes(&dir.join(&output.name), &bytes)?;
        records.push(OutputRecord {
            name: output.name.clone(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&config_bytes),
        outputs: records,
        timings_ms,
    };
    let manifest_text =
        serde_json::to_string_pretty(&manifest).map_err(|source| RreError::Json {
            origin: "manifest serialization".into(),
            source,
        })?;
    write_bytes(&dir.join("manifest.json"), manifest_text.as_bytes())?;
    Ok(manifest)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| RreError::Io {
        path: path.to_path_buf(),
        source,
    })
}
