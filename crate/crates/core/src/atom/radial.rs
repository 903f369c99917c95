//! Quasiclassical radial dipole integrals.
//!
//! The electron follows a Kepler ellipse with semi-major axis n_c² and eccentricity
//! sqrt(1 - (l_c/n_c)²). The radial integral is the Fourier component of the orbit at the
//! non-integer frequency ν_b - ν_a, which reduces to Anger functions.

use std::f64::consts::PI;
use std::sync::OnceLock;

const GAUSS_POINTS: usize = 96;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_POINTS;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// Anger function J_ν(x) = (1/π) ∫₀^π cos(νθ − x sin θ) dθ.
pub fn anger_j(nu: f64, x: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = PI / 2.0;
    nodes
        .iter()
        .zip(weights)
        .map(|(t, w)| {
            let theta = half * (t + 1.0);
            w * (nu * theta - x * theta.sin()).cos()
        })
        .sum::<f64>()
        * half
        / PI
}

/// Radial integral ⟨ν_b l_b| r |ν_a l_a⟩ in atomic units for |l_a − l_b| = 1.
///
/// Effective principal quantum numbers are ν = n − δ. The sign convention makes the
/// outermost lobe of every radial wavefunction positive.
pub fn quasiclassical_radial(nu_a: f64, l_a: u32, nu_b: f64, l_b: u32) -> f64 {
    if l_a.abs_diff(l_b) != 1 {
        return 0.0;
    }
    let s = nu_b - nu_a;
    let dl = l_b as f64 - l_a as f64;
    let l_c = l_a.max(l_b) as f64;
    let n_c = 2.0 * nu_a * nu_b / (nu_a + nu_b);
    let ratio = (l_c / n_c).min(1.0);
    let ecc = (1.0 - ratio * ratio).sqrt();
    let a = n_c * n_c;
    if s.abs() < 1e-8 {
        return 1.5 * a * ecc;
    }
    let x = -ecc * s;
    a / (2.0 * s)
        * ((1.0 + dl * ratio) * anger_j(s - 1.0, x)
            - (1.0 - dl * ratio) * anger_j(s + 1.0, x)
            - 2.0 / PI * (1.0 - ecc) * (PI * s).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anger_reduces_to_bessel_at_integer_order() {
        // J_0(1) and J_1(2.5) from standard tables.
        assert!((anger_j(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((anger_j(1.0, 2.5) - 0.497_094_102_464_274_2).abs() < 1e-13);
    }

    #[test]
    fn anger_zero_argument() {
        let nu: f64 = 0.37;
        let expected = (PI * nu).sin() / (PI * nu);
        assert!((anger_j(nu, 0.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetric_in_arguments() {
        let ab = quasiclassical_radial(76.87, 0, 77.36, 1);
        let ba = quasiclassical_radial(77.36, 1, 76.87, 0);
        assert!((ab - ba).abs() < 1e-9 * ab.abs());
    }

    #[test]
    fn continuous_through_zero_frequency() {
        let at = quasiclassical_radial(80.0, 3, 80.0, 4);
        let near = quasiclassical_radial(80.0, 3, 80.0 + 1e-5, 4);
        assert!((at - near).abs() < 1e-3 * at.abs());
    }

    #[test]
    fn forbidden_pairs_vanish() {
        assert_eq!(quasiclassical_radial(76.9, 0, 76.9, 0), 0.0);
        assert_eq!(quasiclassical_radial(76.9, 0, 78.6, 2), 0.0);
    }
}
