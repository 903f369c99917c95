//! Amplitude propagation and the observables read from it.
//!
//! Hamiltonian diagonals are measured from the initial collective state including its own
//! Stark and Zeeman shifts, so amplitudes live in the frame co-rotating with the
//! non-interacting initial state. The phase of the initial amplitude in this frame is the
//! interaction-induced phase with the single-atom reference already removed.

mod propagate;
mod scan;

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::atom::Manifold;
use crate::basis::CollectiveBasis;
use crate::error::{Error, Result};
use crate::hamiltonian::{InteractionHamiltonian, C64};

pub use propagate::{evolution_operator, propagate_stepped};
pub use scan::{field_scan, find_peaks, uniform_grid, Peak, ScanPoint};

/// Below this magnitude the initial-state phase is reported as undefined.
pub const PHASE_THRESHOLD: f64 = 1e-6;

/// Default relative tolerance of the stepped integrator.
pub const STEP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    pub amplitudes: DVector<C64>,
    pub time_us: f64,
}

impl AmplitudeVector {
    /// All amplitude on basis state `index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amplitudes = DVector::from_element(dim, C64::new(0.0, 0.0));
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, time_us: 0.0 }
    }

    pub fn initial(basis: &CollectiveBasis) -> Self {
        Self::basis_state(basis.len(), basis.initial_index)
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }
}

/// ψ(t) = exp(−2πi·H·t)·ψ0 by the dense matrix exponential, with the stepped integrator as
/// fallback when the exponential is not finite.
pub fn propagate(psi0: &AmplitudeVector, h: &InteractionHamiltonian, t_us: f64) -> Result<AmplitudeVector> {
    propagate::check_dimension(&psi0.amplitudes, h)?;
    if !t_us.is_finite() {
        return Err(Error::Integration(format!("time {t_us}")));
    }
    let amplitudes = match evolution_operator(h, t_us) {
        Ok(u) => u * &psi0.amplitudes,
        Err(_) => propagate_stepped(&psi0.amplitudes, h, t_us, STEP_TOLERANCE)?,
    };
    if amplitudes.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Integration("non-finite amplitudes".into()));
    }
    Ok(AmplitudeVector { amplitudes, time_us: psi0.time_us + t_us })
}

/// Fraction of atoms found in `manifold`, weighting each basis state by its atom count there.
pub fn fraction_in(psi: &AmplitudeVector, basis: &CollectiveBasis, manifold: Manifold) -> f64 {
    let atoms = basis.atom_count() as f64;
    basis
        .states
        .iter()
        .zip(psi.amplitudes.iter())
        .map(|(s, a)| a.norm_sqr() * s.count_in(manifold) as f64 / atoms)
        .sum()
}

/// Fraction f of atoms transferred to 80S1/2.
pub fn observable_f(psi: &AmplitudeVector, basis: &CollectiveBasis) -> f64 {
    fraction_in(psi, basis, Manifold::s(80))
}

/// Phase of the initial-state amplitude, or `None` when its magnitude is below
/// [`PHASE_THRESHOLD`].
pub fn phase_of_initial(psi: &AmplitudeVector, basis: &CollectiveBasis) -> Option<f64> {
    let a = psi.amplitudes[basis.initial_index];
    (a.norm() >= PHASE_THRESHOLD).then(|| a.arg())
}

/// Observables sampled on a time grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Trace {
    pub times_us: Vec<f64>,
    pub population: Vec<f64>,
    /// Unwrapped continuously; `None` where undefined.
    pub phase: Vec<Option<f64>>,
    pub f: Vec<f64>,
    pub norm: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    fn push(&mut self, psi: &AmplitudeVector, basis: &CollectiveBasis) {
        let raw = phase_of_initial(psi, basis);
        let last = self.phase.iter().rev().flatten().next().copied();
        let phase = match (raw, last) {
            (Some(p), Some(prev)) => Some(p + 2.0 * PI * ((prev - p) / (2.0 * PI)).round()),
            (p, _) => p,
        };
        self.times_us.push(psi.time_us);
        self.population.push(psi.population(basis.initial_index));
        self.phase.push(phase);
        self.f.push(observable_f(psi, basis));
        self.norm.push(psi.norm_squared());
    }

    /// Rows of (t_us, p, phase_rad, f, norm); undefined phases are written as empty fields.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_us", "p", "phase_rad", "f", "norm"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.6}", self.times_us[i]),
                format!("{:.12e}", self.population[i]),
                self.phase[i].map(|p| format!("{p:.12e}")).unwrap_or_default(),
                format!("{:.12e}", self.f[i]),
                format!("{:.12e}", self.norm[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Propagates the initial state over `[0, duration]` in `steps` equal intervals.
///
/// A zero duration gives an empty trace.
pub fn trace(h: &InteractionHamiltonian, basis: &CollectiveBasis, duration_us: f64, steps: usize) -> Result<Trace> {
    if !(duration_us >= 0.0) || !duration_us.is_finite() {
        return Err(Error::InvalidConfig(format!("trace duration {duration_us}")));
    }
    let mut out = Trace::default();
    if duration_us == 0.0 {
        return Ok(out);
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("trace needs at least one step".into()));
    }
    let dt = duration_us / steps as f64;
    let u = evolution_operator(h, dt)?;
    let mut psi = AmplitudeVector::initial(basis);
    out.push(&psi, basis);
    for k in 1..=steps {
        psi = AmplitudeVector { amplitudes: &u * &psi.amplitudes, time_us: k as f64 * dt };
        out.push(&psi, basis);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{AtomModel, RydbergLevel};
    use crate::basis::{build_basis, gate_manifolds};
    use crate::fields::FieldConfiguration;
    use crate::hamiltonian::{assemble, Geometry};
    use nalgebra::DMatrix;

    fn diagonal(defects: &[f64], half_gammas: &[f64]) -> InteractionHamiltonian {
        let n = defects.len();
        let mut matrix = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for i in 0..n {
            matrix[(i, i)] = C64::new(defects[i], -half_gammas[i] / (2.0 * PI));
        }
        InteractionHamiltonian { matrix, decay_vector: DVector::from_column_slice(half_gammas) }
    }

    #[test]
    fn free_evolution_phase() {
        let h = diagonal(&[3.0], &[0.0]);
        let psi = AmplitudeVector::basis_state(1, 0);
        let t = 0.123;
        let out = propagate(&psi, &h, t).unwrap();
        let a = out.amplitudes[0];
        assert!((a.norm() - 1.0).abs() < 1e-13);
        let expected = C64::from_polar(1.0, -2.0 * PI * 3.0 * t);
        assert!((a - expected).norm() < 1e-12);
    }

    #[test]
    fn pure_decay() {
        let gamma = 0.004;
        let h = diagonal(&[0.0, 5.0], &[gamma / 2.0, 0.0]);
        let psi = AmplitudeVector::basis_state(2, 0);
        let out = propagate(&psi, &h, 10.0).unwrap();
        assert!((out.norm_squared() - (-gamma * 10.0f64).exp()).abs() < 1e-13);
        let stepped = propagate_stepped(&psi.amplitudes, &h, 10.0, STEP_TOLERANCE).unwrap();
        assert!((stepped.norm_squared() - (-gamma * 10.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let h = diagonal(&[0.0, 1.0], &[0.0, 0.0]);
        let psi = AmplitudeVector::basis_state(3, 0);
        assert!(matches!(propagate(&psi, &h, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn phase_threshold() {
        let basis = pair_basis();
        let mut psi = AmplitudeVector::initial(&basis);
        psi.amplitudes[0] = C64::new(1e-7, 0.0);
        assert!(phase_of_initial(&psi, &basis).is_none());
        psi.amplitudes[0] = C64::new(0.0, 1e-3);
        assert!((phase_of_initial(&psi, &basis).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    fn pair_basis() -> CollectiveBasis {
        let m = AtomModel::rb87();
        let init = [RydbergLevel::new(80, 1, 3, 3).unwrap(), RydbergLevel::new(81, 1, 3, -3).unwrap()];
        build_basis(&init, &gate_manifolds(), 1000.0, &m).unwrap()
    }

    #[test]
    fn f_counts_atoms() {
        let m = AtomModel::rb87();
        let init = [
            RydbergLevel::new(80, 1, 3, 3).unwrap(),
            RydbergLevel::new(81, 1, 3, 3).unwrap(),
            RydbergLevel::new(81, 1, 3, -3).unwrap(),
        ];
        let b = build_basis(&init, &gate_manifolds(), 1000.0, &m).unwrap();
        let psi = AmplitudeVector::initial(&b);
        assert_eq!(observable_f(&psi, &b), 0.0);
        let fin = b
            .index_of(&[
                RydbergLevel::new(80, 0, 1, 1).unwrap(),
                RydbergLevel::new(82, 0, 1, 1).unwrap(),
                RydbergLevel::new(81, 1, 3, 1).unwrap(),
            ])
            .unwrap();
        let psi = AmplitudeVector::basis_state(b.len(), fin);
        assert!((observable_f(&psi, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trace_shape_and_unwrapping() {
        let b = pair_basis();
        let m = AtomModel::rb87();
        let h = assemble(&b, &Geometry::pair(25.0).unwrap(), &FieldConfiguration::new(0.05, 0.0).unwrap(), &m, true)
            .unwrap();
        let tr = trace(&h, &b, 2.0, 200).unwrap();
        assert_eq!(tr.len(), 201);
        assert_eq!(tr.population[0], 1.0);
        assert!(tr.times_us.windows(2).all(|w| w[1] > w[0]));
        for w in tr.phase.windows(2) {
            if let [Some(a), Some(b)] = w {
                assert!((a - b).abs() < PI);
            }
        }
        assert!(trace(&h, &b, 0.0, 10).unwrap().is_empty());
        assert!(trace(&h, &b, -1.0, 10).is_err());
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("t_us,p,phase_rad,f,norm\n"));
    }
}
