//! Polarizabilities from a truncated single-atom Stark matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{AtomModel, Manifold};
use crate::angular::{dipole_angular_factor, AngularMomentum};
use crate::error::{Error, Result};

/// Manifolds with n within `delta_n` of the target, l up to `max_l`, and j ≥ |m|.
fn stark_basis(model: &AtomModel, target: Manifold, twice_abs_m: u32, delta_n: u32, max_l: u32) -> Vec<Manifold> {
    let n_lo = target.n.saturating_sub(delta_n).max(1);
    let mut out = Vec::new();
    for n in n_lo..=target.n + delta_n {
        for l in 0..=max_l.min(n - 1) {
            for twice_j in [2 * l as i64 - 1, 2 * l as i64 + 1] {
                if twice_j < twice_abs_m as i64 || twice_j < 1 {
                    continue;
                }
                let m = Manifold { n, l, twice_j: twice_j as u32 };
                if model.has_series(l, m.twice_j) {
                    out.push(m);
                }
            }
        }
    }
    out
}

/// α in MHz/(V/cm)² from one diagonalization at the configured probe field.
pub(crate) fn polarizability_in_basis(
    model: &AtomModel,
    target: Manifold,
    twice_abs_m: u32,
    delta_n: u32,
) -> Result<f64> {
    let settings = &model.data().stark;
    if twice_abs_m > target.twice_j || twice_abs_m % 2 != target.twice_j % 2 {
        return Err(Error::InvalidQuantumNumbers(format!("|2m|={twice_abs_m} for {target}")));
    }
    if target.l > settings.max_l {
        return Err(Error::InvalidQuantumNumbers(format!("{target} beyond the Stark basis")));
    }
    let basis = stark_basis(model, target, twice_abs_m, delta_n, settings.max_l);
    let index = basis
        .iter()
        .position(|m| *m == target)
        .ok_or(Error::UnknownSeries { l: target.l, twice_j: target.twice_j })?;
    let e0 = model.manifold_energy(target)?;
    let c = &model.data().constants;
    let field_au = settings.probe_field_v_per_cm / c.atomic_field_v_per_cm;
    let dim = basis.len();
    let tm = twice_abs_m as i32;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (i, a) in basis.iter().enumerate() {
        h[(i, i)] = (model.manifold_energy(*a)? - e0) * 1e3;
        for (k, b) in basis.iter().enumerate().skip(i + 1) {
            if a.l.abs_diff(b.l) != 1 {
                continue;
            }
            let angular = dipole_angular_factor(
                b.l,
                AngularMomentum { twice_j: b.twice_j, twice_m: tm },
                a.l,
                AngularMomentum { twice_j: a.twice_j, twice_m: tm },
                0,
            );
            let v = field_au * angular * model.radial_matrix_element(*a, *b)? * c.hartree_mhz;
            h[(i, k)] = v;
            h[(k, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(h);
    let column = (0..dim)
        .max_by(|&x, &y| {
            eig.eigenvectors[(index, x)]
                .abs()
                .total_cmp(&eig.eigenvectors[(index, y)].abs())
        })
        .expect("non-empty Stark basis");
    let shift = eig.eigenvalues[column];
    let f = settings.probe_field_v_per_cm;
    Ok(-2.0 * shift / (f * f))
}

/// α at the configured basis size, checked against a basis one n larger on each side.
pub(crate) fn converged_polarizability(model: &AtomModel, target: Manifold, twice_abs_m: u32) -> Result<f64> {
    let settings = &model.data().stark;
    let alpha = polarizability_in_basis(model, target, twice_abs_m, settings.delta_n)?;
    let wider = polarizability_in_basis(model, target, twice_abs_m, settings.delta_n + 1)?;
    let change = ((wider - alpha) / alpha).abs();
    if !alpha.is_finite() || change > settings.convergence_tolerance {
        return Err(Error::PolarizabilityNotConverged { level: target.to_string(), relative_change: change });
    }
    Ok(alpha)
}
