use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{plus_state, Amplitudes8, QubitState};
use crate::error::Result;
use crate::hamiltonian::C64;

/// Labels of the six single-qubit input states.
pub const SINGLE_QUBIT_STATES: [&str; 6] = ["0", "1", "+", "-", "+i", "-i"];

fn single_qubit_state(label: &str) -> [C64; 2] {
    let h = FRAC_1_SQRT_2;
    match label {
        "0" => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        "1" => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        "+" => plus_state(),
        "-" => [C64::new(h, 0.0), C64::new(-h, 0.0)],
        "+i" => [C64::new(h, 0.0), C64::new(0.0, h)],
        "-i" => [C64::new(h, 0.0), C64::new(0.0, -h)],
        _ => unreachable!("unknown single-qubit label {label}"),
    }
}

/// All 216 product inputs, control 1 varying slowest.
pub fn fidelity_inputs() -> Vec<([&'static str; 3], QubitState)> {
    let mut out = Vec::with_capacity(216);
    for a in SINGLE_QUBIT_STATES {
        for b in SINGLE_QUBIT_STATES {
            for c in SINGLE_QUBIT_STATES {
                let state = QubitState::product([single_qubit_state(a), single_qubit_state(b), single_qubit_state(c)]);
                out.push(([a, b, c], state));
            }
        }
    }
    out
}

/// |⟨ψ_et|ψ_sim⟩| = √⟨ψ_et|ρ_sim|ψ_et⟩ for a normalized etalon and an unnormalized output.
pub fn pure_state_fidelity(etalon: &Amplitudes8, simulated: &Amplitudes8) -> f64 {
    etalon.dotc(simulated).norm()
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale * m.nrows() as f64;
    let roots = eig.eigenvalues.map(|v| if v > floor { v.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    &scaled * v.adjoint()
}

/// Tr√(√ρ σ √ρ) for positive semidefinite ρ, σ.
///
/// Eigenvalues below the resolution of the decomposition are treated as zero.
pub fn uhlmann_fidelity(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    let root = hermitian_sqrt(rho);
    let mut inner = &root * sigma * &root;
    inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let eig = inner.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale * rho.nrows() as f64;
    eig.eigenvalues.iter().filter(|v| **v > floor).map(|v| v.sqrt()).sum()
}

/// |ψ⟩⟨ψ| without normalization.
pub fn density_matrix(psi: &Amplitudes8) -> DMatrix<C64> {
    DMatrix::from_fn(8, 8, |i, j| psi[i] * psi[j].conj())
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub mean: f64,
    pub min: f64,
    pub labels: Vec<[&'static str; 3]>,
    pub per_input: Vec<f64>,
}

impl FidelityReport {
    pub fn new(labels: Vec<[&'static str; 3]>, per_input: Vec<f64>) -> Self {
        let mean = per_input.iter().sum::<f64>() / per_input.len().max(1) as f64;
        let min = per_input.iter().copied().fold(f64::INFINITY, f64::min);
        Self { mean, min, labels, per_input }
    }

    /// Rows of (control1, target, control2, fidelity).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["control1", "target", "control2", "fidelity"])?;
        for (l, f) in self.labels.iter().zip(&self.per_input) {
            w.write_record([l[0], l[1], l[2], &format!("{f:.12e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}
