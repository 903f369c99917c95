use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rydberg_gate::atom::AtomModel;
use rydberg_gate::gate::OptimizerConfig;
use serde::{Deserialize, Serialize};

pub const ATOMIC_DATA_ENV: &str = "RYDBERG_GATE_ATOMIC_DATA";

/// Contents of a `--config` TOML file. Command-line flags take precedence.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub atomic_data: Option<PathBuf>,
    pub decay: Option<bool>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub point: PointConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    pub optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub electric_v_per_cm: Option<f64>,
    pub magnetic_g: Option<f64>,
    pub spacing_um: Option<f64>,
    pub tau_us: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub electric_min: Option<f64>,
    pub electric_max: Option<f64>,
    pub points: Option<usize>,
    pub tau_us: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| rydberg_gate::Error::InvalidConfig(format!("{}: {e}", path.display())).into())
    }
}

/// Flag or environment, then config file; the bundled table otherwise.
pub fn load_model(flag: Option<&Path>, file: &FileConfig) -> Result<(AtomModel, Option<PathBuf>)> {
    let path = flag.map(Path::to_path_buf).or_else(|| file.atomic_data.clone());
    match path {
        Some(p) => Ok((AtomModel::from_path(&p)?, Some(p))),
        None => Ok((AtomModel::rb87(), None)),
    }
}

/// Settings common to every command, recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub atomic_data: Option<PathBuf>,
    pub decay: bool,
    pub workers: Option<usize>,
}
