use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;

use serde::Serialize;

use super::data::{self, twice_j_of, AtomicData};
use super::radial::quasiclassical_radial;
use super::stark;
use super::{Manifold, RydbergLevel};
use crate::angular::{dipole_angular_factor, lande_g};
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;

/// Per-sublevel properties in interface units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelProperties {
    /// GHz relative to the ionization limit.
    pub energy_ghz: f64,
    /// MHz/(V/cm)^2 for this |m_j|.
    pub polarizability: f64,
    /// 1/µs.
    pub decay_rate: f64,
    /// MHz/G along +Z.
    pub zeeman_slope: f64,
}

/// Rb atom described by an atomic data file.
///
/// Radial integrals and polarizabilities are memoized behind locks, so a shared
/// `&AtomModel` can be used from parallel workers.
#[derive(Debug)]
pub struct AtomModel {
    data: AtomicData,
    checksum: String,
    radial_cache: RwLock<HashMap<(Manifold, Manifold), f64>>,
    polarizability_cache: RwLock<HashMap<(Manifold, u32), f64>>,
}

impl Clone for AtomModel {
    fn clone(&self) -> Self {
        Self::with_checksum(self.data.clone(), self.checksum.clone())
    }
}

impl AtomModel {
    /// The shipped 87Rb data.
    pub fn rb87() -> Self {
        Self::from_toml(data::DEFAULT_RB87).expect("shipped atomic data is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(Self::with_checksum(AtomicData::parse(text)?, data::checksum(text)))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let (data, text) = AtomicData::load(path)?;
        Ok(Self::with_checksum(data, data::checksum(&text)))
    }

    fn with_checksum(data: AtomicData, checksum: String) -> Self {
        Self {
            data,
            checksum,
            radial_cache: RwLock::default(),
            polarizability_cache: RwLock::default(),
        }
    }

    /// A copy of this model at another ambient temperature.
    pub fn with_temperature(&self, kelvin: f64) -> Result<Self> {
        if !(kelvin >= 0.0) {
            return Err(Error::InvalidConfig(format!("temperature {kelvin} K")));
        }
        let mut data = self.data.clone();
        data.lifetime.temperature_k = kelvin;
        Ok(Self::with_checksum(data, format!("{}+T={kelvin}", self.checksum)))
    }

    pub fn data(&self) -> &AtomicData {
        &self.data
    }

    /// SHA-256 of the data file text, with a suffix for in-memory overrides.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn version(&self) -> &str {
        &self.data.version
    }

    pub fn temperature(&self) -> f64 {
        self.data.lifetime.temperature_k
    }

    pub fn has_series(&self, l: u32, twice_j: u32) -> bool {
        self.data
            .series
            .iter()
            .any(|s| s.l == l && twice_j_of(s.j).ok() == Some(twice_j))
    }

    pub fn quantum_defect(&self, m: Manifold) -> Result<f64> {
        let s = self
            .data
            .series
            .iter()
            .find(|s| s.l == m.l && twice_j_of(s.j).ok() == Some(m.twice_j))
            .ok_or(Error::UnknownSeries { l: m.l, twice_j: m.twice_j })?;
        let n = m.n as f64;
        Ok(s.delta0 + s.delta2 / (n - s.delta0).powi(2))
    }

    pub fn effective_n(&self, m: Manifold) -> Result<f64> {
        Ok(m.n as f64 - self.quantum_defect(m)?)
    }

    /// Zero-field binding energy in GHz (negative).
    pub fn manifold_energy(&self, m: Manifold) -> Result<f64> {
        Ok(-self.data.constants.rydberg_ghz / self.effective_n(m)?.powi(2))
    }

    pub fn level_energy(&self, level: &RydbergLevel) -> Result<f64> {
        self.manifold_energy(level.manifold())
    }

    /// ⟨b| r |a⟩ in atomic units; zero unless |l_a − l_b| = 1.
    pub fn radial_matrix_element(&self, a: Manifold, b: Manifold) -> Result<f64> {
        if a.l.abs_diff(b.l) != 1 {
            return Ok(0.0);
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(v) = self.radial_cache.read().expect("radial cache poisoned").get(&key) {
            return Ok(*v);
        }
        let value = quasiclassical_radial(self.effective_n(a)?, a.l, self.effective_n(b)?, b.l);
        self.radial_cache.write().expect("radial cache poisoned").insert(key, value);
        Ok(value)
    }

    /// ⟨b| r_q |a⟩ in atomic units.
    pub fn dipole_matrix_element(&self, a: &RydbergLevel, b: &RydbergLevel, q: i32) -> Result<f64> {
        let angular = dipole_angular_factor(b.l, b.j, a.l, a.j, q);
        if angular == 0.0 {
            return Ok(0.0);
        }
        Ok(angular * self.radial_matrix_element(a.manifold(), b.manifold())?)
    }

    /// Quadratic Stark coefficient α in MHz/(V/cm)², with shift −α F²/2.
    pub fn polarizability(&self, m: Manifold, twice_abs_m: u32) -> Result<f64> {
        let key = (m, twice_abs_m);
        if let Some(v) = self.polarizability_cache.read().expect("polarizability cache poisoned").get(&key) {
            return Ok(*v);
        }
        let value = stark::converged_polarizability(self, m, twice_abs_m)?;
        self.polarizability_cache
            .write()
            .expect("polarizability cache poisoned")
            .insert(key, value);
        Ok(value)
    }

    /// Total decay rate (spontaneous plus blackbody-induced) in 1/µs.
    pub fn decay_rate(&self, m: Manifold) -> Result<f64> {
        let rad = self
            .data
            .lifetime
            .radiative
            .iter()
            .find(|r| r.l == m.l && twice_j_of(r.j).ok() == Some(m.twice_j))
            .ok_or(Error::UnknownSeries { l: m.l, twice_j: m.twice_j })?;
        let nu = self.effective_n(m)?;
        let tau_us = rad.tau_ns * nu.powf(rad.exponent) * 1e-3;
        let c = &self.data.constants;
        let kt = c.boltzmann_hartree_per_k * self.data.lifetime.temperature_k;
        let bbr_au = self.data.lifetime.blackbody_scale * 4.0 * c.fine_structure.powi(3) * kt / (3.0 * nu * nu);
        Ok(1.0 / tau_us + bbr_au / c.atomic_time_us)
    }

    /// Zeeman slope μ_B g_j m_j in MHz per gauss of field along +Z.
    pub fn zeeman_slope(&self, level: &RydbergLevel) -> f64 {
        self.data.constants.bohr_magneton_mhz_per_g * lande_g(level.l, 1, level.j.twice_j) * level.j.m()
    }

    /// Zeeman shift in MHz for a field `b_z` gauss along +Z.
    pub fn zeeman_shift(&self, level: &RydbergLevel, b_z: f64) -> f64 {
        self.zeeman_slope(level) * b_z
    }

    /// Stark plus Zeeman shift of a sublevel in MHz.
    pub fn field_shift(&self, level: &RydbergLevel, fields: &FieldConfiguration) -> Result<f64> {
        let mut shift = self.zeeman_shift(level, fields.magnetic_field_along_z());
        let e = fields.electric_v_per_cm;
        if e != 0.0 {
            shift -= 0.5 * self.polarizability(level.manifold(), level.j.twice_m.unsigned_abs())? * e * e;
        }
        Ok(shift)
    }

    pub fn level_properties(&self, level: &RydbergLevel) -> Result<LevelProperties> {
        Ok(LevelProperties {
            energy_ghz: self.level_energy(level)?,
            polarizability: self.polarizability(level.manifold(), level.j.twice_m.unsigned_abs())?,
            decay_rate: self.decay_rate(level.manifold())?,
            zeeman_slope: self.zeeman_slope(level),
        })
    }

    pub fn um_to_bohr(&self, um: f64) -> f64 {
        um / self.data.constants.bohr_radius_um
    }

    pub fn hartree_mhz(&self) -> f64 {
        self.data.constants.hartree_mhz
    }
}
