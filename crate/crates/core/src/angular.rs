//! Angular-momentum algebra on doubled quantum numbers.
//!
//! Every `j` and `m` argument is passed as twice its value so that half-integers are exact.
//! Phases follow the Condon-Shortley convention. Factorial ratios are evaluated in log space,
//! which keeps all symbols finite up to `twice_j = 200` and beyond.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pair `(j, m)` stored as `(2j, 2m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngularMomentum {
    pub twice_j: u32,
    pub twice_m: i32,
}

impl AngularMomentum {
    pub fn new(twice_j: u32, twice_m: i32) -> Result<Self> {
        if twice_m.unsigned_abs() > twice_j || (twice_j as i32 - twice_m) % 2 != 0 {
            return Err(Error::InvalidQuantumNumbers(format!(
                "projection 2m={twice_m} incompatible with 2j={twice_j}"
            )));
        }
        Ok(Self { twice_j, twice_m })
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }

    /// All projections `m = -j..=j`.
    pub fn projections(twice_j: u32) -> impl Iterator<Item = AngularMomentum> {
        let tj = twice_j as i32;
        (-tj..=tj).step_by(2).map(move |twice_m| AngularMomentum { twice_j, twice_m })
    }
}

const TABLE_SIZE: usize = 2048;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_SIZE);
        t.push(0.0);
        for k in 1..TABLE_SIZE {
            let prev = t[k - 1];
            t.push(prev + (k as f64).ln());
        }
        t
    })
}

/// ln(k!) for an integer k >= 0. Stirling series beyond the table.
fn ln_factorial(k: i64) -> f64 {
    debug_assert!(k >= 0);
    let k = k as usize;
    if k < TABLE_SIZE {
        return ln_factorial_table()[k];
    }
    let x = k as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// Converts a doubled sum that must be even into an integer; `None` when odd or negative.
fn half(twice: i64) -> Option<i64> {
    if twice < 0 || twice % 2 != 0 {
        None
    } else {
        Some(twice / 2)
    }
}

fn triangle(ta: u32, tb: u32, tc: u32) -> bool {
    let (a, b, c) = (ta as i64, tb as i64, tc as i64);
    c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// ln Δ(abc) = ln[(a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!], triangle assumed.
fn ln_delta(ta: u32, tb: u32, tc: u32) -> f64 {
    let (a, b, c) = (ta as i64, tb as i64, tc as i64);
    ln_factorial((a + b - c) / 2) + ln_factorial((a - b + c) / 2) + ln_factorial((-a + b + c) / 2)
        - ln_factorial((a + b + c) / 2 + 1)
}

fn parity_sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn valid_projection(tj: u32, tm: i32) -> bool {
    tm.unsigned_abs() <= tj && (tj as i64 - tm as i64) % 2 == 0
}

/// Clebsch-Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ on doubled arguments.
///
/// Returns 0 outside the coupling domain.
pub fn clebsch_gordan(tj1: u32, tm1: i32, tj2: u32, tm2: i32, tj: u32, tm: i32) -> f64 {
    if tm1 + tm2 != tm
        || !triangle(tj1, tj2, tj)
        || !valid_projection(tj1, tm1)
        || !valid_projection(tj2, tm2)
        || !valid_projection(tj, tm)
    {
        return 0.0;
    }
    let (j1, m1, j2, m2, j, m) = (tj1 as i64, tm1 as i64, tj2 as i64, tm2 as i64, tj as i64, tm as i64);
    let ln_pref = 0.5
        * ((j + 1) as f64).ln()
        + 0.5 * ln_delta(tj1, tj2, tj)
        + 0.5
            * (ln_factorial((j1 + m1) / 2)
                + ln_factorial((j1 - m1) / 2)
                + ln_factorial((j2 + m2) / 2)
                + ln_factorial((j2 - m2) / 2)
                + ln_factorial((j + m) / 2)
                + ln_factorial((j - m) / 2));
    // Denominator factorials: k, (j1+j2-J)/2-k, (j1-m1)/2-k, (j2+m2)/2-k, (J-j2+m1)/2+k, (J-j1-m2)/2+k.
    let a1 = (j1 + j2 - j) / 2;
    let a2 = (j1 - m1) / 2;
    let a3 = (j2 + m2) / 2;
    let b1 = (j - j2 + m1) / 2;
    let b2 = (j - j1 - m2) / 2;
    let k_min = 0.max(-b1).max(-b2);
    let k_max = a1.min(a2).min(a3);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(a1 - k)
            + ln_factorial(a2 - k)
            + ln_factorial(a3 - k)
            + ln_factorial(b1 + k)
            + ln_factorial(b2 + k);
        sum += parity_sign(k) * (ln_pref - ln_den).exp();
    }
    sum
}

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) on doubled arguments.
pub fn wigner_3j(tj1: u32, tj2: u32, tj3: u32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    if tm1 + tm2 + tm3 != 0
        || !triangle(tj1, tj2, tj3)
        || !valid_projection(tj1, tm1)
        || !valid_projection(tj2, tm2)
        || !valid_projection(tj3, tm3)
    {
        return 0.0;
    }
    let (j1, j2, j3) = (tj1 as i64, tj2 as i64, tj3 as i64);
    let (m1, m2, m3) = (tm1 as i64, tm2 as i64, tm3 as i64);
    let Some(phase) = half(j1 - j2 - m3 + 2 * (j1 + j2 + j3)) else {
        return 0.0;
    };
    let ln_pref = 0.5 * ln_delta(tj1, tj2, tj3)
        + 0.5
            * (ln_factorial((j1 + m1) / 2)
                + ln_factorial((j1 - m1) / 2)
                + ln_factorial((j2 + m2) / 2)
                + ln_factorial((j2 - m2) / 2)
                + ln_factorial((j3 + m3) / 2)
                + ln_factorial((j3 - m3) / 2));
    // Denominator: k, (j3-j2+m1)/2+k, (j3-j1-m2)/2+k, (j1+j2-j3)/2-k, (j1-m1)/2-k, (j2+m2)/2-k.
    let b1 = (j3 - j2 + m1) / 2;
    let b2 = (j3 - j1 - m2) / 2;
    let a1 = (j1 + j2 - j3) / 2;
    let a2 = (j1 - m1) / 2;
    let a3 = (j2 + m2) / 2;
    let k_min = 0.max(-b1).max(-b2);
    let k_max = a1.min(a2).min(a3);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(b1 + k)
            + ln_factorial(b2 + k)
            + ln_factorial(a1 - k)
            + ln_factorial(a2 - k)
            + ln_factorial(a3 - k);
        sum += parity_sign(k) * (ln_pref - ln_den).exp();
    }
    parity_sign(phase) * sum
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} on doubled arguments.
pub fn wigner_6j(tj1: u32, tj2: u32, tj3: u32, tj4: u32, tj5: u32, tj6: u32) -> f64 {
    if !triangle(tj1, tj2, tj3)
        || !triangle(tj1, tj5, tj6)
        || !triangle(tj4, tj2, tj6)
        || !triangle(tj4, tj5, tj3)
    {
        return 0.0;
    }
    let (j1, j2, j3, j4, j5, j6) = (
        tj1 as i64, tj2 as i64, tj3 as i64, tj4 as i64, tj5 as i64, tj6 as i64,
    );
    let ln_pref = 0.5
        * (ln_delta(tj1, tj2, tj3)
            + ln_delta(tj1, tj5, tj6)
            + ln_delta(tj4, tj2, tj6)
            + ln_delta(tj4, tj5, tj3));
    let s1 = (j1 + j2 + j3) / 2;
    let s2 = (j1 + j5 + j6) / 2;
    let s3 = (j4 + j2 + j6) / 2;
    let s4 = (j4 + j5 + j3) / 2;
    let p1 = (j1 + j2 + j4 + j5) / 2;
    let p2 = (j2 + j3 + j5 + j6) / 2;
    let p3 = (j3 + j1 + j6 + j4) / 2;
    let t_min = s1.max(s2).max(s3).max(s4);
    let t_max = p1.min(p2).min(p3);
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let ln_term = ln_factorial(t + 1)
            - ln_factorial(t - s1)
            - ln_factorial(t - s2)
            - ln_factorial(t - s3)
            - ln_factorial(t - s4)
            - ln_factorial(p1 - t)
            - ln_factorial(p2 - t)
            - ln_factorial(p3 - t);
        sum += parity_sign(t) * (ln_pref + ln_term).exp();
    }
    sum
}

/// Landé factor g_j for spin `twice_s / 2` (g_s taken as 2).
pub fn lande_g(l: u32, twice_s: u32, twice_j: u32) -> f64 {
    let j = twice_j as f64 / 2.0;
    let s = twice_s as f64 / 2.0;
    let l = l as f64;
    1.5 + (s * (s + 1.0) - l * (l + 1.0)) / (2.0 * j * (j + 1.0))
}

/// Angular part of ⟨l' j' m'| r_q |l j m⟩ for a single electron with spin 1/2.
///
/// Multiplying by the radial integral ⟨n' l'| r |n l⟩ gives the spherical component of the
/// dipole matrix element.
pub fn dipole_angular_factor(
    l_final: u32,
    final_state: AngularMomentum,
    l_initial: u32,
    initial_state: AngularMomentum,
    q: i32,
) -> f64 {
    if l_final.abs_diff(l_initial) != 1 || final_state.twice_m != initial_state.twice_m + 2 * q {
        return 0.0;
    }
    let (tjf, tmf) = (final_state.twice_j, final_state.twice_m);
    let (tji, tmi) = (initial_state.twice_j, initial_state.twice_m);
    // Wigner-Eckart: (-1)^(j'-m') (j' 1 j; -m' q m) <l' j'||r||l j>.
    let we_phase = parity_sign(((tjf as i64 - tmf as i64) / 2).rem_euclid(2));
    let three_j = wigner_3j(tjf, 2, tji, -tmf, 2 * q, tmi);
    if three_j == 0.0 {
        return 0.0;
    }
    // <l' j'||r||l j> = (-1)^(l'+s+j+1) sqrt((2j+1)(2j'+1)) {l' j' s; j l 1} <l'||r||l>.
    let twice_phase = 2 * l_final as i64 + 1 + tji as i64 + 2;
    let fine_phase = parity_sign(twice_phase / 2);
    let six_j = wigner_6j(2 * l_final, tjf, 1, tji, 2 * l_initial, 2);
    let fine = fine_phase * (((tji + 1) * (tjf + 1)) as f64).sqrt() * six_j;
    // <l'||r||l> = (-1)^l' sqrt((2l+1)(2l'+1)) (l' 1 l; 0 0 0).
    let orbital = parity_sign(l_final as i64)
        * (((2 * l_initial + 1) * (2 * l_final + 1)) as f64).sqrt()
        * wigner_3j(2 * l_final, 2, 2 * l_initial, 0, 0, 0);
    we_phase * three_j * fine * orbital
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn condon_shortley_sign() {
        let c = clebsch_gordan(2, 2, 2, -2, 4, 0);
        assert!((c - 1.0 / 6f64.sqrt()).abs() < 1e-14, "{c}");
        assert!((clebsch_gordan(2, 0, 2, 0, 4, 0) - (2.0 / 3f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trivial_coupling_is_one() {
        for tj in 0..12u32 {
            for am in AngularMomentum::projections(tj) {
                let c = clebsch_gordan(tj, am.twice_m, 0, 0, tj, am.twice_m);
                assert!((c - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn three_j_closed_form() {
        let v = wigner_3j(2, 2, 4, 0, 0, 0);
        assert!((v - (2.0f64 / 15.0).sqrt()).abs() < 1e-14);
        // (1/2 1/2 1; 1/2 -1/2 0) = 1/sqrt(6)
        assert!((wigner_3j(1, 1, 2, 1, -1, 0) - 1.0 / 6f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn six_j_known_values() {
        // {1 1 1; 1 1 1} = 1/6
        assert!((wigner_6j(2, 2, 2, 2, 2, 2) - 1.0 / 6.0).abs() < 1e-14);
        // {1/2 1/2 1; 1/2 1/2 0} = 1/2
        assert!((wigner_6j(1, 1, 2, 1, 1, 0) - 0.5).abs() < 1e-14);
        assert_eq!(wigner_6j(0, 1, 1, 2, 1, 5), 0.0);
        assert_eq!(wigner_6j(2, 2, 8, 2, 2, 2), 0.0);
    }

    #[test]
    fn lande_values() {
        assert!((lande_g(0, 1, 1) - 2.0).abs() < 1e-15);
        assert!((lande_g(1, 1, 3) - 4.0 / 3.0).abs() < 1e-15);
        assert!((lande_g(1, 1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_projection_rejected() {
        assert!(AngularMomentum::new(3, 5).is_err());
        assert!(AngularMomentum::new(3, 2).is_err());
        assert!(AngularMomentum::new(3, -3).is_ok());
    }

    #[test]
    fn large_arguments_stay_finite() {
        for tj in [100u32, 150, 200] {
            let v = wigner_3j(tj, tj, 2 * tj, tj as i32, -(tj as i32), 0);
            assert!(v.is_finite() && v.abs() <= 1.0);
            let c = clebsch_gordan(tj, 2, tj, -2, 2 * tj, 0);
            assert!(c.is_finite() && c.abs() <= 1.0);
            let s = wigner_6j(tj, tj, 2, tj, tj, 2);
            assert!(s.is_finite() && s.abs() <= 1.0);
        }
    }

    #[test]
    fn s_to_p_reduced_factor() {
        // |<P3/2 m=1/2| r_0 |S1/2 m=1/2>|^2 summed over final sublevels and q equals 2/3 of R^2
        // for j'=3/2 and 1/3 for j'=1/2.
        let s = AngularMomentum::new(1, 1).unwrap();
        let mut total = [0.0; 2];
        for (idx, tjf) in [1u32, 3].iter().enumerate() {
            for f in AngularMomentum::projections(*tjf) {
                for q in -1..=1 {
                    total[idx] += dipole_angular_factor(1, f, 0, s, q).powi(2);
                }
            }
        }
        assert!((total[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((total[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    fn coupled_triples() -> impl Strategy<Value = (u32, u32)> {
        (0u32..=9, 0u32..=9)
    }

    proptest! {
        #[test]
        fn cg_orthogonality((tj1, tj2) in coupled_triples(), tm_total in -18i32..=18) {
            let j_min = tj1.abs_diff(tj2);
            let js: Vec<u32> = (j_min..=tj1 + tj2).step_by(2).collect();
            for &ja in &js {
                for &jb in &js {
                    if !valid_projection(ja, tm_total) || !valid_projection(jb, tm_total) {
                        continue;
                    }
                    let mut overlap = 0.0;
                    for m1 in AngularMomentum::projections(tj1) {
                        let tm2 = tm_total - m1.twice_m;
                        if !valid_projection(tj2, tm2) {
                            continue;
                        }
                        overlap += clebsch_gordan(tj1, m1.twice_m, tj2, tm2, ja, tm_total)
                            * clebsch_gordan(tj1, m1.twice_m, tj2, tm2, jb, tm_total);
                    }
                    let expected = if ja == jb { 1.0 } else { 0.0 };
                    prop_assert!((overlap - expected).abs() < 1e-12, "{} {} {} {}", tj1, tj2, ja, jb);
                }
            }
        }

        #[test]
        fn completeness_over_total_j((tj1, tj2) in coupled_triples(), i1 in 0usize..10, i2 in 0usize..10) {
            let m1s: Vec<_> = AngularMomentum::projections(tj1).collect();
            let m2s: Vec<_> = AngularMomentum::projections(tj2).collect();
            let m1 = m1s[i1 % m1s.len()].twice_m;
            let m2 = m2s[i2 % m2s.len()].twice_m;
            let sum: f64 = (tj1.abs_diff(tj2)..=tj1 + tj2)
                .step_by(2)
                .map(|tj| clebsch_gordan(tj1, m1, tj2, m2, tj, m1 + m2).powi(2))
                .sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cg_matches_three_j((tj1, tj2) in coupled_triples(), pick in 0usize..100) {
            let mut cases = Vec::new();
            for tj in (tj1.abs_diff(tj2)..=tj1 + tj2).step_by(2) {
                for m1 in AngularMomentum::projections(tj1) {
                    for m2 in AngularMomentum::projections(tj2) {
                        cases.push((tj, m1.twice_m, m2.twice_m));
                    }
                }
            }
            let (tj, m1, m2) = cases[pick % cases.len()];
            let m = m1 + m2;
            if valid_projection(tj, m) {
                let cg = clebsch_gordan(tj1, m1, tj2, m2, tj, m);
                let phase = parity_sign((tj1 as i64 - tj2 as i64 + m as i64) / 2);
                let via_3j = phase * ((tj + 1) as f64).sqrt() * wigner_3j(tj1, tj2, tj, m1, m2, -m);
                prop_assert!((cg - via_3j).abs() < 1e-12);
            }
        }

        #[test]
        fn three_j_even_permutation((tj1, tj2) in coupled_triples(), k in 0usize..50) {
            let tj3s: Vec<u32> = (tj1.abs_diff(tj2)..=tj1 + tj2).step_by(2).collect();
            let tj3 = tj3s[k % tj3s.len()];
            let m1 = AngularMomentum::projections(tj1).nth(k % (tj1 as usize + 1)).unwrap().twice_m;
            let m2 = AngularMomentum::projections(tj2).nth((k / 3) % (tj2 as usize + 1)).unwrap().twice_m;
            let m3 = -m1 - m2;
            let a = wigner_3j(tj1, tj2, tj3, m1, m2, m3);
            let b = wigner_3j(tj2, tj3, tj1, m2, m3, m1);
            let c = wigner_3j(tj3, tj1, tj2, m3, m1, m2);
            prop_assert!((a - b).abs() < 1e-13 && (a - c).abs() < 1e-13);
        }
    }
}
