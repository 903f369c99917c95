//! Dipole-dipole Hamiltonian over a collective basis.
//!
//! Matrix entries are ordinary frequencies in MHz. Decay enters the diagonal as
//! −i·γ/(4π) MHz, so that propagation with exp(−2πi·H·t) damps each amplitude as exp(−γt/2)
//! with γ in 1/µs.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::clebsch_gordan;
use crate::atom::{AtomModel, RydbergLevel};
use crate::basis::CollectiveBasis;
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;

pub type C64 = Complex<f64>;

/// Largest basis accepted by [`assemble`].
pub const MAX_DIMENSION: usize = 10_000;

/// Atom positions on the Z axis in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    positions_um: Vec<f64>,
}

impl Geometry {
    /// Three atoms at −R, 0, +R.
    pub fn linear_triple(spacing_um: f64) -> Result<Self> {
        if !(spacing_um > 0.0) || !spacing_um.is_finite() {
            return Err(Error::InvalidConfig(format!("spacing must be positive, got {spacing_um}")));
        }
        Ok(Self { positions_um: vec![-spacing_um, 0.0, spacing_um] })
    }

    /// Two atoms separated by `distance_um`.
    pub fn pair(distance_um: f64) -> Result<Self> {
        if !(distance_um > 0.0) || !distance_um.is_finite() {
            return Err(Error::InvalidConfig(format!("distance must be positive, got {distance_um}")));
        }
        Ok(Self { positions_um: vec![0.0, distance_um] })
    }

    /// Keeps only the listed atoms, in the given order.
    pub fn subset(&self, atoms: &[usize]) -> Result<Self> {
        let positions_um = atoms
            .iter()
            .map(|&k| {
                self.positions_um
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("no atom {k} in geometry")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { positions_um })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions_um
    }

    pub fn len(&self) -> usize {
        self.positions_um.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_um.is_empty()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.positions_um[a] - self.positions_um[b]).abs()
    }
}

/// ⟨final| V_dd |initial⟩ in MHz for two atoms on the Z axis `distance_um` apart.
///
/// V = −√6/R³ Σ_q C(1 q; 1 −q | 2 0) a_q b_−q in atomic units.
pub fn pair_coupling(
    initial: [RydbergLevel; 2],
    final_pair: [RydbergLevel; 2],
    distance_um: f64,
    model: &AtomModel,
) -> Result<f64> {
    if !(distance_um > 0.0) {
        return Err(Error::InvalidConfig(format!("pair distance must be positive, got {distance_um}")));
    }
    if initial[0].twice_m() + initial[1].twice_m() != final_pair[0].twice_m() + final_pair[1].twice_m() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for q in -1..=1 {
        let a = model.dipole_matrix_element(&initial[0], &final_pair[0], q)?;
        if a == 0.0 {
            continue;
        }
        let b = model.dipole_matrix_element(&initial[1], &final_pair[1], -q)?;
        sum += clebsch_gordan(2, 2 * q, 2, -2 * q, 4, 0) * a * b;
    }
    let r = model.um_to_bohr(distance_um);
    Ok(-(6f64).sqrt() * sum / r.powi(3) * model.hartree_mhz())
}

fn check_dimension(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Basis("empty basis".into()));
    }
    if dim > MAX_DIMENSION {
        return Err(Error::DimensionOverflow(dim));
    }
    Ok(())
}

/// Field-independent off-diagonal couplings, stored once per (basis, geometry).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    dim: usize,
    /// Upper-triangle entries (row < col) in MHz.
    entries: Vec<(usize, usize, f64)>,
}

impl CouplingMatrix {
    pub fn new(basis: &CollectiveBasis, geometry: &Geometry, model: &AtomModel) -> Result<Self> {
        let dim = basis.len();
        check_dimension(dim)?;
        if geometry.len() != basis.atom_count() {
            return Err(Error::DimensionMismatch { expected: basis.atom_count(), actual: geometry.len() });
        }
        let rows: Vec<Vec<(usize, usize, f64)>> = (0..dim)
            .into_par_iter()
            .map(|i| -> Result<Vec<(usize, usize, f64)>> {
                let mut row = Vec::new();
                let a = &basis.states[i].atoms;
                for (j, other) in basis.states.iter().enumerate().skip(i + 1) {
                    let b = &other.atoms;
                    let mut changed = a.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y).map(|(k, _)| k);
                    let (Some(p), Some(q), None) = (changed.next(), changed.next(), changed.next()) else {
                        continue;
                    };
                    let v = pair_coupling([a[p], a[q]], [b[p], b[q]], geometry.distance(p, q), model)?;
                    if v != 0.0 {
                        row.push((i, j, v));
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        Ok(Self { dim, entries: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (i, j) = if row < col { (row, col) } else { (col, row) };
        self.entries
            .iter()
            .find(|(a, b, _)| *a == i && *b == j)
            .map(|e| e.2)
            .unwrap_or(0.0)
    }

    /// Upper-triangle nonzero entries.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

/// Non-Hermitian Hamiltonian at one field configuration.
#[derive(Debug, Clone)]
pub struct InteractionHamiltonian {
    /// MHz (ordinary frequency).
    pub matrix: DMatrix<C64>,
    /// γ/2 per state in 1/µs; zero when decay is off.
    pub decay_vector: DVector<f64>,
}

impl InteractionHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn has_decay(&self) -> bool {
        self.decay_vector.iter().any(|g| *g != 0.0)
    }

    /// Nonzero entries with state labels.
    pub fn write_csv<W: Write>(&self, basis: &CollectiveBasis, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "row_state", "col_state", "re_MHz", "im_MHz"])?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = self.matrix[(i, j)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    basis.states[i].label(),
                    basis.states[j].label(),
                    format!("{:.9e}", v.re),
                    format!("{:.9e}", v.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed pieces that make re-assembly at new fields cheap.
#[derive(Debug, Clone)]
pub struct HamiltonianBuilder {
    couplings: CouplingMatrix,
    defect0: Vec<f64>,
    polarizability_sum: Vec<f64>,
    zeeman_sum: Vec<f64>,
    decay_sum: Vec<f64>,
}

impl HamiltonianBuilder {
    pub fn new(basis: &CollectiveBasis, geometry: &Geometry, model: &AtomModel) -> Result<Self> {
        let couplings = CouplingMatrix::new(basis, geometry, model)?;
        let sum_over = |s: &[RydbergLevel], f: &dyn Fn(&RydbergLevel) -> Result<f64>| -> Result<f64> {
            s.iter().map(f).sum()
        };
        let alpha = |a: &RydbergLevel| model.polarizability(a.manifold(), a.twice_m().unsigned_abs());
        let zeeman = |a: &RydbergLevel| Ok(model.zeeman_slope(a));
        let gamma = |a: &RydbergLevel| model.decay_rate(a.manifold());
        let init = &basis.initial().atoms;
        let (alpha0, zeeman0) = (sum_over(init, &alpha)?, sum_over(init, &zeeman)?);
        let mut builder = Self {
            couplings,
            defect0: Vec::with_capacity(basis.len()),
            polarizability_sum: Vec::with_capacity(basis.len()),
            zeeman_sum: Vec::with_capacity(basis.len()),
            decay_sum: Vec::with_capacity(basis.len()),
        };
        for s in &basis.states {
            builder.defect0.push(s.defect0_mhz);
            builder.polarizability_sum.push(sum_over(&s.atoms, &alpha)? - alpha0);
            builder.zeeman_sum.push(sum_over(&s.atoms, &zeeman)? - zeeman0);
            builder.decay_sum.push(sum_over(&s.atoms, &gamma)?);
        }
        Ok(builder)
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.couplings
    }

    /// Diagonal Förster defects at the given fields, MHz.
    pub fn defects(&self, fields: &FieldConfiguration) -> Vec<f64> {
        let e2 = fields.electric_v_per_cm.powi(2);
        let bz = fields.magnetic_field_along_z();
        (0..self.defect0.len())
            .map(|i| self.defect0[i] - 0.5 * self.polarizability_sum[i] * e2 + self.zeeman_sum[i] * bz)
            .collect()
    }

    /// Total decay rate of each state in 1/µs.
    pub fn decay_rates(&self) -> &[f64] {
        &self.decay_sum
    }

    pub fn at(&self, fields: &FieldConfiguration, with_decay: bool) -> InteractionHamiltonian {
        let dim = self.couplings.dim;
        let mut matrix = DMatrix::<C64>::zeros(dim, dim);
        for &(i, j, v) in &self.couplings.entries {
            matrix[(i, j)] = C64::new(v, 0.0);
            matrix[(j, i)] = C64::new(v, 0.0);
        }
        let decay_vector = DVector::from_iterator(
            dim,
            self.decay_sum.iter().map(|g| if with_decay { g / 2.0 } else { 0.0 }),
        );
        for (i, d) in self.defects(fields).into_iter().enumerate() {
            matrix[(i, i)] = C64::new(d, -decay_vector[i] / (2.0 * PI));
        }
        InteractionHamiltonian { matrix, decay_vector }
    }
}

/// Hamiltonian over `basis` for atoms at `geometry` in static `fields`.
pub fn assemble(
    basis: &CollectiveBasis,
    geometry: &Geometry,
    fields: &FieldConfiguration,
    model: &AtomModel,
    with_decay: bool,
) -> Result<InteractionHamiltonian> {
    Ok(HamiltonianBuilder::new(basis, geometry, model)?.at(fields, with_decay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, forster_defect, gate_manifolds};

    fn lvl(n: u32, l: u32, tj: u32, tm: i32) -> RydbergLevel {
        RydbergLevel::new(n, l, tj, tm).unwrap()
    }

    fn gate_initial() -> Vec<RydbergLevel> {
        vec![lvl(80, 1, 3, 3), lvl(81, 1, 3, 3), lvl(81, 1, 3, -3)]
    }

    #[test]
    fn coupling_selection_rule_and_scaling() {
        let m = AtomModel::rb87();
        let init = [lvl(80, 1, 3, 3), lvl(81, 1, 3, 3)];
        let forbidden = pair_coupling(init, [lvl(80, 0, 1, 1), lvl(82, 0, 1, 1)], 12.5, &m).unwrap();
        assert_eq!(forbidden, 0.0);
        let init = [lvl(80, 1, 3, 3), lvl(81, 1, 3, -3)];
        let fin = [lvl(80, 0, 1, 1), lvl(82, 0, 1, -1)];
        let near = pair_coupling(init, fin, 12.5, &m).unwrap();
        let far = pair_coupling(init, fin, 25.0, &m).unwrap();
        assert!((near / far - 8.0).abs() < 1e-12);
        assert!((far + 0.9346).abs() < 2e-3, "{far}");
        assert!(pair_coupling(init, fin, 0.0, &m).is_err());
    }

    #[test]
    fn hermitian_without_decay_and_zero_initial_diagonal() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let g = Geometry::linear_triple(12.5).unwrap();
        let h = assemble(&b, &g, &FieldConfiguration::zero(), &m, false).unwrap();
        let diff = (&h.matrix - h.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert_eq!(h.matrix[(0, 0)], C64::new(0.0, 0.0));
        let with = assemble(&b, &g, &FieldConfiguration::zero(), &m, true).unwrap();
        assert!(with.matrix[(0, 0)].im < 0.0);
        assert!((with.decay_vector[0] * 2.0 - with.matrix[(0, 0)].im.abs() * 4.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matches_forster_defect() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let g = Geometry::linear_triple(12.5).unwrap();
        let f = FieldConfiguration::new(0.119, 3.5).unwrap();
        let h = assemble(&b, &g, &f, &m, true).unwrap();
        for (i, s) in b.states.iter().enumerate().step_by(7) {
            let d = forster_defect(&s.atoms, &b.initial().atoms, &f, &m).unwrap();
            assert!((h.matrix[(i, i)].re - d).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn three_body_transfer_is_second_order() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let g = Geometry::linear_triple(12.5).unwrap();
        let h = assemble(&b, &g, &FieldConfiguration::zero(), &m, false).unwrap();
        let fin = b.index_of(&[lvl(80, 0, 1, 1), lvl(82, 0, 1, 1), lvl(81, 1, 3, 1)]).unwrap();
        let mid = b.index_of(&[lvl(80, 0, 1, 1), lvl(81, 1, 3, 3), lvl(82, 0, 1, -1)]).unwrap();
        assert_eq!(h.matrix[(0, fin)].norm(), 0.0);
        assert!(h.matrix[(0, mid)].norm() > 0.0);
        assert!(h.matrix[(mid, fin)].norm() > 0.0);
    }

    #[test]
    fn dimension_guard() {
        assert!(check_dimension(MAX_DIMENSION).is_ok());
        assert!(matches!(check_dimension(MAX_DIMENSION + 1), Err(Error::DimensionOverflow(_))));
        assert!(check_dimension(0).is_err());
    }

    #[test]
    fn geometry_must_match_basis() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let g = Geometry::pair(10.0).unwrap();
        assert!(matches!(CouplingMatrix::new(&b, &g, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matrix_dump_lists_nonzero_entries() {
        let m = AtomModel::rb87();
        let init = [lvl(80, 1, 3, 3), lvl(81, 1, 3, -3)];
        let b = build_basis(&init, &gate_manifolds(), 1000.0, &m).unwrap();
        let h = assemble(&b, &Geometry::pair(25.0).unwrap(), &FieldConfiguration::zero(), &m, true).unwrap();
        let mut out = Vec::new();
        h.write_csv(&b, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let nonzero = h.matrix.iter().filter(|v| v.norm() != 0.0).count();
        assert_eq!(text.lines().count(), nonzero + 1);
    }
}
