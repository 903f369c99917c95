use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{InteractionHamiltonian, C64};

/// exp(−2πi·H·t) for H in MHz and t in µs, by scaling-and-squaring Padé.
///
/// The mean diagonal is factored out first so the exponentiated matrix has the smallest norm.
pub fn evolution_operator(h: &InteractionHamiltonian, t_us: f64) -> Result<DMatrix<C64>> {
    let dim = h.dim();
    let factor = C64::new(0.0, -2.0 * PI * t_us);
    let mean = h.matrix.trace() / dim as f64;
    let mut a = h.matrix.map(|v| v * factor);
    let shift = mean * factor;
    for i in 0..dim {
        a[(i, i)] -= shift;
    }
    let u = a.exp() * shift.exp();
    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Integration(format!("non-finite propagator at t = {t_us} µs")));
    }
    Ok(u)
}

/// Sparse row storage of −2πi·H.
struct SparseGenerator {
    rows: Vec<Vec<(usize, C64)>>,
    one_norm: f64,
}

impl SparseGenerator {
    fn new(h: &InteractionHamiltonian) -> Self {
        let dim = h.dim();
        let factor = C64::new(0.0, -2.0 * PI);
        let mut rows = vec![Vec::new(); dim];
        let mut col_sums = vec![0.0; dim];
        for i in 0..dim {
            for j in 0..dim {
                let v = h.matrix[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    rows[i].push((j, v * factor));
                    col_sums[j] += v.norm() * 2.0 * PI;
                }
            }
        }
        let one_norm = col_sums.into_iter().fold(0.0, f64::max);
        Self { rows, one_norm }
    }

    fn apply(&self, v: &DVector<C64>, out: &mut DVector<C64>) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|(j, a)| a * v[*j]).sum();
        }
    }
}

/// Truncated-Taylor stepping of ψ(t) = exp(−2πi·H·t)·ψ0.
///
/// Steps satisfy ‖2πH·h‖₁ ≤ 1 and each series runs until the next term falls below `tol`
/// relative to the state norm.
pub fn propagate_stepped(psi0: &DVector<C64>, h: &InteractionHamiltonian, t_us: f64, tol: f64) -> Result<DVector<C64>> {
    check_dimension(psi0, h)?;
    if t_us == 0.0 {
        return Ok(psi0.clone());
    }
    let gen = SparseGenerator::new(h);
    let steps = (gen.one_norm * t_us.abs()).ceil().max(1.0) as usize;
    let dt = t_us / steps as f64;
    let mut psi = psi0.clone();
    let mut term = psi.clone();
    let mut next = psi.clone();
    for _ in 0..steps {
        term.copy_from(&psi);
        let mut acc = psi.clone();
        let scale = acc.norm().max(f64::MIN_POSITIVE);
        for k in 1..=200 {
            gen.apply(&term, &mut next);
            next *= C64::new(dt / k as f64, 0.0);
            std::mem::swap(&mut term, &mut next);
            acc += &term;
            if term.norm() <= tol * scale {
                break;
            }
            if k == 200 {
                return Err(Error::Integration("Taylor series did not converge".into()));
            }
        }
        psi = acc;
    }
    if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Integration("non-finite amplitudes".into()));
    }
    Ok(psi)
}

pub(crate) fn check_dimension(psi: &DVector<C64>, h: &InteractionHamiltonian) -> Result<()> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: psi.len() });
    }
    Ok(())
}
