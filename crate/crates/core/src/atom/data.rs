use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Atomic data shipped with the crate.
pub(crate) const DEFAULT_RB87: &str = include_str!("../../data/rb87.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub rydberg_ghz: f64,
    pub hartree_mhz: f64,
    pub bohr_radius_um: f64,
    pub atomic_field_v_per_cm: f64,
    pub atomic_time_us: f64,
    pub fine_structure: f64,
    pub boltzmann_hartree_per_k: f64,
    pub bohr_magneton_mhz_per_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDefects {
    pub l: u32,
    pub j: f64,
    pub delta0: f64,
    pub delta2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialLifetime {
    pub l: u32,
    pub j: f64,
    pub tau_ns: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeParameters {
    pub temperature_k: f64,
    #[serde(default = "unit")]
    pub blackbody_scale: f64,
    pub radiative: Vec<RadialLifetime>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkSettings {
    pub probe_field_v_per_cm: f64,
    pub delta_n: u32,
    pub max_l: u32,
    pub convergence_tolerance: f64,
}

/// Parsed contents of an atomic data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicData {
    pub version: String,
    pub constants: PhysicalConstants,
    pub series: Vec<SeriesDefects>,
    pub lifetime: LifetimeParameters,
    pub stark: StarkSettings,
}

pub(crate) fn twice_j_of(j: f64) -> Result<u32> {
    let tj = (2.0 * j).round();
    if (2.0 * j - tj).abs() > 1e-9 || tj < 1.0 || tj as u32 % 2 != 1 {
        return Err(Error::AtomicData(format!("j = {j} is not a positive half-integer")));
    }
    Ok(tj as u32)
}

impl AtomicData {
    pub fn parse(text: &str) -> Result<Self> {
        let data: AtomicData = toml::from_str(text).map_err(|e| Error::AtomicData(e.to_string()))?;
        data.validate()?;
        Ok(data)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    fn validate(&self) -> Result<()> {
        for s in &self.series {
            let tj = twice_j_of(s.j)?;
            if tj + 1 != 2 * s.l && tj != 2 * s.l + 1 {
                return Err(Error::AtomicData(format!("series l={} has j={}", s.l, s.j)));
            }
            if s.l <= 1 && s.delta0 <= 0.0 {
                return Err(Error::AtomicData(format!("quantum defect of l={} must be positive", s.l)));
            }
        }
        for r in &self.lifetime.radiative {
            twice_j_of(r.j)?;
            if r.tau_ns <= 0.0 {
                return Err(Error::AtomicData("radiative lifetime prefactor must be positive".into()));
            }
        }
        if self.lifetime.temperature_k < 0.0 || self.lifetime.blackbody_scale < 0.0 {
            return Err(Error::AtomicData("temperature and blackbody scale must be non-negative".into()));
        }
        let st = &self.stark;
        if st.probe_field_v_per_cm <= 0.0 || st.delta_n == 0 || st.convergence_tolerance <= 0.0 {
            return Err(Error::AtomicData("invalid Stark settings".into()));
        }
        let c = &self.constants;
        let all = [
            c.rydberg_ghz,
            c.hartree_mhz,
            c.bohr_radius_um,
            c.atomic_field_v_per_cm,
            c.atomic_time_us,
            c.fine_structure,
            c.boltzmann_hartree_per_k,
            c.bohr_magneton_mhz_per_g,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::AtomicData("physical constants must be positive".into()));
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256 of the raw file text.
pub(crate) fn checksum(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
