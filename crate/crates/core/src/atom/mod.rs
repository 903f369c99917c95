//! Single-atom Rb Rydberg structure.

mod data;
mod model;
mod radial;
mod stark;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angular::AngularMomentum;
use crate::error::{Error, Result};

pub use data::{AtomicData, LifetimeParameters, PhysicalConstants, RadialLifetime, SeriesDefects, StarkSettings};
pub use model::{AtomModel, LevelProperties};
pub use radial::{anger_j, quasiclassical_radial};

const ORBITAL_LETTERS: [char; 7] = ['S', 'P', 'D', 'F', 'G', 'H', 'I'];

/// A fine-structure manifold |n l j⟩ (all m_j sublevels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Manifold {
    pub n: u32,
    pub l: u32,
    pub twice_j: u32,
}

impl Manifold {
    pub fn new(n: u32, l: u32, twice_j: u32) -> Result<Self> {
        if n == 0 || l >= n {
            return Err(Error::InvalidQuantumNumbers(format!("l={l} not below n={n}")));
        }
        if twice_j + 1 != 2 * l && twice_j != 2 * l + 1 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "j={twice_j}/2 not l±1/2 for l={l}"
            )));
        }
        Ok(Self { n, l, twice_j })
    }

    /// Shorthand for S1/2.
    pub fn s(n: u32) -> Self {
        Self { n, l: 0, twice_j: 1 }
    }

    /// Shorthand for P with the given 2j.
    pub fn p(n: u32, twice_j: u32) -> Self {
        Self { n, l: 1, twice_j }
    }

    pub fn level(&self, twice_m: i32) -> Result<RydbergLevel> {
        RydbergLevel::new(self.n, self.l, self.twice_j, twice_m)
    }

    pub fn sublevels(&self) -> impl Iterator<Item = RydbergLevel> + '_ {
        AngularMomentum::projections(self.twice_j).map(move |j| RydbergLevel { n: self.n, l: self.l, j })
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = ORBITAL_LETTERS.get(self.l as usize).copied().unwrap_or('?');
        write!(f, "{}{}{}/2", self.n, letter, self.twice_j)
    }
}

/// One Rydberg sublevel |n l j m_j⟩; `j` carries both 2j and 2m_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RydbergLevel {
    pub n: u32,
    pub l: u32,
    pub j: AngularMomentum,
}

impl RydbergLevel {
    pub fn new(n: u32, l: u32, twice_j: u32, twice_m: i32) -> Result<Self> {
        Manifold::new(n, l, twice_j)?;
        Ok(Self { n, l, j: AngularMomentum::new(twice_j, twice_m)? })
    }

    pub fn manifold(&self) -> Manifold {
        Manifold { n: self.n, l: self.l, twice_j: self.j.twice_j }
    }

    pub fn twice_m(&self) -> i32 {
        self.j.twice_m
    }

    /// The same level with m_j reversed.
    pub fn mirrored(&self) -> Self {
        Self { j: AngularMomentum { twice_m: -self.j.twice_m, ..self.j }, ..*self }
    }
}

impl fmt::Display for RydbergLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tm = self.j.twice_m;
        let m = if tm % 2 == 0 { format!("{}", tm / 2) } else { format!("{tm}/2") };
        write!(f, "{}({})", self.manifold(), m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        let l = RydbergLevel::new(81, 1, 3, -3).unwrap();
        assert_eq!(l.to_string(), "81P3/2(-3/2)");
        assert_eq!(Manifold::s(80).to_string(), "80S1/2");
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(RydbergLevel::new(80, 0, 3, 1).is_err());
        assert!(RydbergLevel::new(3, 3, 7, 1).is_err());
        assert!(RydbergLevel::new(80, 1, 3, 5).is_err());
        assert_eq!(Manifold::p(80, 3).sublevels().count(), 4);
    }
}
