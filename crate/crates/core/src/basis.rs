//! Collective product bases of several Rydberg atoms.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::atom::{AtomModel, Manifold, RydbergLevel};
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;

/// Zero-field defect cutoff of the gate basis in MHz.
pub const DEFAULT_CUTOFF_MHZ: f64 = 1000.0;

/// Single-atom manifolds spanned by the gate basis.
pub fn gate_manifolds() -> Vec<Manifold> {
    vec![
        Manifold::s(80),
        Manifold::s(81),
        Manifold::s(82),
        Manifold::p(80, 1),
        Manifold::p(80, 3),
        Manifold::p(81, 1),
        Manifold::p(81, 3),
    ]
}

/// Product state of the atoms, ordered by position along Z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollectiveState {
    pub atoms: Vec<RydbergLevel>,
    pub twice_m_total: i32,
    /// Zero-field Förster defect relative to the basis initial state, MHz.
    pub defect0_mhz: f64,
}

impl CollectiveState {
    pub fn new(atoms: Vec<RydbergLevel>) -> Self {
        let twice_m_total = atoms.iter().map(|a| a.twice_m()).sum();
        Self { atoms, twice_m_total, defect0_mhz: 0.0 }
    }

    /// Number of atoms in the given manifold.
    pub fn count_in(&self, manifold: Manifold) -> usize {
        self.atoms.iter().filter(|a| a.manifold() == manifold).count()
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CollectiveState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "|{}>", parts.join(" "))
    }
}

/// Deterministically ordered truncated basis. The initial state is always index 0.
#[derive(Debug, Clone)]
pub struct CollectiveBasis {
    pub states: Vec<CollectiveState>,
    pub initial_index: usize,
    pub manifolds: Vec<Manifold>,
    pub cutoff_mhz: f64,
    lookup: HashMap<Vec<RydbergLevel>, usize>,
}

impl CollectiveBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.states[0].atoms.len()
    }

    pub fn initial(&self) -> &CollectiveState {
        &self.states[self.initial_index]
    }

    pub fn index_of(&self, atoms: &[RydbergLevel]) -> Option<usize> {
        self.lookup.get(atoms).copied()
    }

    /// SHA-256 over the ordered state labels and defects.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.states {
            h.update(format!("{} {:.9}\n", s, s.defect0_mhz).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One row per state: index, per-atom labels and quantum numbers, 2M, zero-field defect.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        for k in 1..=self.atom_count() {
            for col in ["label", "n", "l", "twice_j", "twice_mj"] {
                header.push(format!("atom{k}_{col}"));
            }
        }
        header.push("twice_M".into());
        header.push("defect0_MHz".into());
        w.write_record(&header)?;
        for (i, s) in self.states.iter().enumerate() {
            let mut row = vec![i.to_string()];
            for a in &s.atoms {
                row.push(a.to_string());
                row.push(a.n.to_string());
                row.push(a.l.to_string());
                row.push(a.j.twice_j.to_string());
                row.push(a.j.twice_m.to_string());
            }
            row.push(s.twice_m_total.to_string());
            row.push(format!("{:.6}", s.defect0_mhz));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Enumerates every product of sublevels of `manifolds` with the initial state's total
/// projection and |zero-field defect| ≤ `cutoff_mhz`.
pub fn build_basis(
    initial: &[RydbergLevel],
    manifolds: &[Manifold],
    cutoff_mhz: f64,
    model: &AtomModel,
) -> Result<CollectiveBasis> {
    if initial.is_empty() {
        return Err(Error::Basis("initial state has no atoms".into()));
    }
    if !(cutoff_mhz > 0.0) {
        return Err(Error::Basis(format!("cutoff must be positive, got {cutoff_mhz}")));
    }
    let mut manifolds: Vec<Manifold> = manifolds.to_vec();
    manifolds.sort();
    manifolds.dedup();
    if let Some(a) = initial.iter().find(|a| !manifolds.contains(&a.manifold())) {
        return Err(Error::Basis(format!("initial level {a} outside the admitted manifolds")));
    }
    let energies: Vec<f64> = manifolds
        .iter()
        .map(|m| model.manifold_energy(*m))
        .collect::<Result<_>>()?;
    let initial_manifolds: Vec<Manifold> = initial.iter().map(|a| a.manifold()).collect();
    let initial_energy: Vec<f64> = initial_manifolds
        .iter()
        .map(|m| model.manifold_energy(*m))
        .collect::<Result<_>>()?;
    let twice_m_total: i32 = initial.iter().map(|a| a.twice_m()).sum();
    let n_atoms = initial.len();

    let mut states = Vec::new();
    let mut choice = vec![0usize; n_atoms];
    loop {
        let defect: f64 = (0..n_atoms)
            .map(|k| (energies[choice[k]] - initial_energy[k]) * 1e3)
            .sum();
        let tuple: Vec<Manifold> = choice.iter().map(|&c| manifolds[c]).collect();
        let is_initial_tuple = tuple == initial_manifolds;
        if defect.abs() <= cutoff_mhz || is_initial_tuple {
            let defect = if is_initial_tuple { 0.0 } else { defect };
            push_sublevel_products(&tuple, twice_m_total, defect, &mut states);
        }
        // Odometer over manifold tuples.
        let mut k = n_atoms;
        loop {
            if k == 0 {
                return finish(states, initial, manifolds, cutoff_mhz);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < manifolds.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

fn push_sublevel_products(tuple: &[Manifold], twice_m_total: i32, defect: f64, out: &mut Vec<CollectiveState>) {
    fn recurse(
        tuple: &[Manifold],
        remaining: i32,
        current: &mut Vec<RydbergLevel>,
        defect: f64,
        out: &mut Vec<CollectiveState>,
    ) {
        let Some((first, rest)) = tuple.split_first() else {
            if remaining == 0 {
                let mut s = CollectiveState::new(current.clone());
                s.defect0_mhz = defect;
                out.push(s);
            }
            return;
        };
        let reach: i32 = rest.iter().map(|m| m.twice_j as i32).sum();
        for level in first.sublevels() {
            let left = remaining - level.twice_m();
            if left.abs() > reach {
                continue;
            }
            current.push(level);
            recurse(rest, left, current, defect, out);
            current.pop();
        }
    }
    recurse(tuple, twice_m_total, &mut Vec::with_capacity(tuple.len()), defect, out);
}

fn finish(
    mut states: Vec<CollectiveState>,
    initial: &[RydbergLevel],
    manifolds: Vec<Manifold>,
    cutoff_mhz: f64,
) -> Result<CollectiveBasis> {
    let init_pos = states
        .iter()
        .position(|s| s.atoms == initial)
        .ok_or_else(|| Error::Basis("initial state missing from enumeration".into()))?;
    let init = states.swap_remove(init_pos);
    states.sort_by(|a, b| a.defect0_mhz.total_cmp(&b.defect0_mhz).then_with(|| a.atoms.cmp(&b.atoms)));
    states.insert(0, init);
    let lookup = states.iter().enumerate().map(|(i, s)| (s.atoms.clone(), i)).collect();
    Ok(CollectiveBasis { states, initial_index: 0, manifolds, cutoff_mhz, lookup })
}

/// Energy of `state` minus that of `initial` in MHz, including Stark and Zeeman shifts.
pub fn forster_defect(
    state: &[RydbergLevel],
    initial: &[RydbergLevel],
    fields: &FieldConfiguration,
    model: &AtomModel,
) -> Result<f64> {
    if state.len() != initial.len() {
        return Err(Error::DimensionMismatch { expected: initial.len(), actual: state.len() });
    }
    let mut total = 0.0;
    for (s, i) in state.iter().zip(initial) {
        if s.manifold() != i.manifold() {
            total += (model.level_energy(s)? - model.level_energy(i)?) * 1e3;
        }
        total += model.field_shift(s, fields)? - model.field_shift(i, fields)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(n: u32, l: u32, tj: u32, tm: i32) -> RydbergLevel {
        RydbergLevel::new(n, l, tj, tm).unwrap()
    }

    fn gate_initial() -> Vec<RydbergLevel> {
        vec![lvl(80, 1, 3, 3), lvl(81, 1, 3, 3), lvl(81, 1, 3, -3)]
    }

    #[test]
    fn gate_basis_has_165_states() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), DEFAULT_CUTOFF_MHZ, &m).unwrap();
        assert_eq!(b.len(), 165);
        assert_eq!(b.initial_index, 0);
        assert_eq!(b.initial().defect0_mhz, 0.0);
        assert!(b.states.iter().all(|s| s.twice_m_total == 3));
        assert!(b.states.iter().all(|s| s.defect0_mhz.abs() <= 1000.0));
    }

    #[test]
    fn tiny_cutoff_keeps_degenerate_states_only() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1e-6, &m).unwrap();
        assert!(b.states.iter().all(|s| s.defect0_mhz.abs() <= 1e-6));
        // Initial plus permutations of the same manifolds with M preserved.
        assert!(b.len() > 1);
        assert!(b.states.iter().all(|s| {
            let mut a: Vec<_> = s.atoms.iter().map(|x| x.manifold()).collect();
            let mut i: Vec<_> = gate_initial().iter().map(|x| x.manifold()).collect();
            a.sort();
            i.sort();
            a == i
        }));
    }

    #[test]
    fn rejects_foreign_initial_state() {
        let m = AtomModel::rb87();
        let err = build_basis(&[lvl(79, 1, 3, 3)], &gate_manifolds(), 1000.0, &m);
        assert!(matches!(err, Err(Error::Basis(_))));
        assert!(build_basis(&gate_initial(), &gate_manifolds(), 0.0, &m).is_err());
    }

    #[test]
    fn deterministic_order() {
        let m = AtomModel::rb87();
        let a = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let mut shuffled = gate_manifolds();
        shuffled.reverse();
        let b = build_basis(&gate_initial(), &shuffled, 1000.0, &m).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn closed_under_exchange_of_atoms_two_and_three() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        for s in &b.states {
            let swapped = vec![s.atoms[0], s.atoms[2], s.atoms[1]];
            assert!(b.index_of(&swapped).is_some(), "{s}");
        }
    }

    #[test]
    fn pair_basis_matches_enumeration() {
        let m = AtomModel::rb87();
        let init = [lvl(80, 1, 3, 3), lvl(81, 1, 3, -3)];
        let b = build_basis(&init, &gate_manifolds(), 1000.0, &m).unwrap();
        assert_eq!(b.len(), 26);
        assert!(b.index_of(&[lvl(80, 0, 1, 1), lvl(82, 0, 1, -1)]).is_some());
    }

    #[test]
    fn defect_of_initial_is_zero() {
        let m = AtomModel::rb87();
        let f = FieldConfiguration::new(0.12, 3.5).unwrap();
        assert_eq!(forster_defect(&gate_initial(), &gate_initial(), &f, &m).unwrap(), 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = AtomModel::rb87();
        let b = build_basis(&gate_initial(), &gate_manifolds(), 1000.0, &m).unwrap();
        let mut out = Vec::new();
        b.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("index,atom1_label,atom1_n"));
        assert_eq!(lines.count(), 165);
        assert!(text.contains("80P3/2(3/2)"));
    }
}
