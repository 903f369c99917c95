use rayon::prelude::*;
use serde::Serialize;

use super::{observable_f, propagate, AmplitudeVector};
use crate::basis::CollectiveBasis;
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;
use crate::hamiltonian::HamiltonianBuilder;

/// One row of an electric-field scan. Failed points carry the error text and NaN observables.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub electric_v_per_cm: f64,
    pub f: f64,
    pub p: f64,
    pub norm: f64,
    pub error: Option<String>,
}

/// `points` evenly spaced values covering [lo, hi]; a single point when lo == hi.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidConfig(format!("grid [{lo}, {hi}]")));
    }
    if lo == hi || points == 1 {
        return Ok(vec![lo]);
    }
    if points < 2 {
        return Err(Error::InvalidConfig("grid needs at least two points".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|k| lo + step * k as f64).collect())
}

/// Transfer fraction f after `tau_us` at each electric field, other fields held at `fixed`.
pub fn field_scan(
    electric_fields: &[f64],
    fixed: &FieldConfiguration,
    tau_us: f64,
    builder: &HamiltonianBuilder,
    basis: &CollectiveBasis,
    with_decay: bool,
) -> Result<Vec<ScanPoint>> {
    if !(tau_us > 0.0) {
        return Err(Error::InvalidConfig(format!("interaction time must be positive, got {tau_us}")));
    }
    Ok(electric_fields
        .par_iter()
        .map(|&e| {
            let h = builder.at(&fixed.with_electric(e), with_decay);
            match propagate(&AmplitudeVector::initial(basis), &h, tau_us) {
                Ok(psi) => ScanPoint {
                    electric_v_per_cm: e,
                    f: observable_f(&psi, basis),
                    p: psi.population(basis.initial_index),
                    norm: psi.norm_squared(),
                    error: None,
                },
                Err(err) => ScanPoint {
                    electric_v_per_cm: e,
                    f: f64::NAN,
                    p: f64::NAN,
                    norm: f64::NAN,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect())
}

/// A local maximum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub index: usize,
    /// Parabolic refinement of the maximum position.
    pub center: f64,
    pub height: f64,
    pub prominence: f64,
    /// Full width at half prominence.
    pub width: f64,
}

/// Local maxima of `y(x)` with prominence at least `min_prominence`, in order of `x`.
/// NaN samples are treated as missing.
pub fn find_peaks(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = x.len().min(y.len());
    let val = |i: usize| if y[i].is_nan() { f64::NEG_INFINITY } else { y[i] };
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(val(i) > val(i - 1)) {
            i += 1;
            continue;
        }
        // Plateaus count once, at their midpoint.
        let mut j = i;
        while j + 1 < n && val(j + 1) == val(i) {
            j += 1;
        }
        if j + 1 < n && val(j + 1) < val(i) {
            let top = (i + j) / 2;
            let h = val(top);
            let mut left_min = h;
            let mut k = i;
            while k > 0 {
                k -= 1;
                if val(k) > h {
                    break;
                }
                left_min = left_min.min(val(k));
            }
            let mut right_min = h;
            let mut k = j;
            while k + 1 < n {
                k += 1;
                if val(k) > h {
                    break;
                }
                right_min = right_min.min(val(k));
            }
            let prominence = h - left_min.max(right_min);
            if prominence >= min_prominence && prominence.is_finite() {
                peaks.push(Peak {
                    index: top,
                    center: refine(x, y, top),
                    height: h,
                    prominence,
                    width: half_width(x, y, top, h - prominence / 2.0),
                });
            }
        }
        i = j + 1;
    }
    peaks
}

fn refine(x: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return x[i];
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 || !denom.is_finite() {
        return x[i];
    }
    let offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    let h = if offset >= 0.0 { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
    x[i] + offset * h
}

fn half_width(x: &[f64], y: &[f64], top: usize, level: f64) -> f64 {
    let cross = |a: usize, b: usize| -> f64 {
        let t = (level - y[a]) / (y[b] - y[a]);
        x[a] + t * (x[b] - x[a])
    };
    let mut left = x[0];
    let mut k = top;
    while k > 0 {
        if y[k - 1] <= level {
            left = cross(k - 1, k);
            break;
        }
        k -= 1;
    }
    let mut right = x[x.len() - 1];
    let mut k = top;
    while k + 1 < x.len() {
        if y[k + 1] <= level {
            right = cross(k, k + 1);
            break;
        }
        k += 1;
    }
    right - left
}
