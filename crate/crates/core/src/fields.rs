use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static fields applied during an interaction segment.
///
/// The electric field points along +Z. A positive `magnetic_g` means the magnetic field points
/// along −Z, antiparallel to the electric field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldConfiguration {
    pub electric_v_per_cm: f64,
    pub magnetic_g: f64,
}

/// Written into output metadata next to every magnetic field value.
pub const MAGNETIC_FIELD_CONVENTION: &str = "positive B is antiparallel to E (along -Z)";

impl FieldConfiguration {
    pub fn new(electric_v_per_cm: f64, magnetic_g: f64) -> Result<Self> {
        if !electric_v_per_cm.is_finite() || !magnetic_g.is_finite() {
            return Err(Error::InvalidConfig("fields must be finite".into()));
        }
        Ok(Self { electric_v_per_cm, magnetic_g })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Magnetic field component along +Z in gauss.
    pub fn magnetic_field_along_z(&self) -> f64 {
        -self.magnetic_g
    }

    pub fn with_electric(self, electric_v_per_cm: f64) -> Self {
        Self { electric_v_per_cm, ..self }
    }

    pub fn with_magnetic(self, magnetic_g: f64) -> Self {
        Self { magnetic_g, ..self }
    }
}
