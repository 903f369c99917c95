//! Simulation of a three-qubit Toffoli gate built on Stark-tuned three-body Förster
//! resonances of Rb Rydberg atoms.
//!
//! Units at every public boundary: V/cm, gauss, µm, µs, and MHz for energies
//! (ordinary frequency). Atomic units appear only inside [`atom`].

pub mod angular;
pub mod atom;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod gate;
pub mod hamiltonian;
pub mod report;

pub use error::{Error, Result};
