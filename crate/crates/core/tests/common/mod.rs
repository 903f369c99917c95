//! Reference calculations used only by the integration tests.

#![allow(dead_code)]

pub const STEP: f64 = 0.005;

/// Radial function from inward Numerov integration in the bare Coulomb potential at the
/// energy −1/(2ν²), on the lattice x = √r = k·STEP.
pub struct NumerovState {
    /// Lattice index of the first stored point.
    pub first: usize,
    /// X = x^{3/2} R(r) ascending in x, normalized so 2∫X²x² dx = 1.
    pub amplitude: Vec<f64>,
}

impl NumerovState {
    pub fn new(nu: f64, l: u32) -> Self {
        let energy = -0.5 / (nu * nu);
        let lf = l as f64;
        let centrifugal = (2.0 * lf + 0.5) * (2.0 * lf + 1.5);
        let g = |k: usize| {
            let x = k as f64 * STEP;
            centrifugal / (x * x) - 8.0 - 8.0 * x * x * energy
        };
        let top = ((2.0 * nu * (nu + 15.0)).sqrt() / STEP).ceil() as usize;
        // Inner classical turning point of l(l+1)/(2r²) − 1/r = E.
        let r_turn = if l == 0 { 0.0 } else { nu * nu * (1.0 - (1.0 - lf * (lf + 1.0) / (nu * nu)).sqrt()) };
        let bottom = ((0.5 * r_turn.max(1.0)).sqrt() / STEP).floor() as usize;
        let h2 = STEP * STEP / 12.0;
        // desc[i] holds lattice index top − i.
        let mut desc = vec![0.0, 1e-10];
        let mut k = top - 1;
        while k > bottom {
            let (a, b) = (desc[desc.len() - 2], desc[desc.len() - 1]);
            let next = (2.0 * b * (1.0 + 5.0 * h2 * g(k)) - a * (1.0 - h2 * g(k + 1))) / (1.0 - h2 * g(k - 1));
            let r = ((k - 1) as f64 * STEP).powi(2);
            // Below the turning point the solution grows towards the origin without bound.
            if r < r_turn && next.abs() > b.abs() {
                break;
            }
            desc.push(next);
            k -= 1;
        }
        let first = top + 1 - desc.len();
        let mut amplitude = desc;
        amplitude.reverse();
        let norm: f64 = amplitude
            .iter()
            .enumerate()
            .map(|(i, a)| 2.0 * a * a * ((first + i) as f64 * STEP).powi(2))
            .sum::<f64>()
            * STEP;
        let scale = norm.sqrt();
        amplitude.iter_mut().for_each(|a| *a /= scale);
        Self { first, amplitude }
    }

    fn at(&self, k: usize) -> f64 {
        if k < self.first {
            return 0.0;
        }
        self.amplitude.get(k - self.first).copied().unwrap_or(0.0)
    }

    /// ⟨a|r|b⟩ in bohr.
    pub fn radial_element(&self, other: &NumerovState) -> f64 {
        let lo = self.first.max(other.first);
        let hi = (self.first + self.amplitude.len()).min(other.first + other.amplitude.len());
        (lo..hi).map(|k| 2.0 * self.at(k) * other.at(k) * (k as f64 * STEP).powi(4)).sum::<f64>() * STEP
    }

    /// ⟨r⟩ in bohr.
    pub fn mean_radius(&self) -> f64 {
        self.radial_element(self)
    }
}
