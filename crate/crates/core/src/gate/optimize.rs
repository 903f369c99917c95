//! Four-step search for an operating point at a fixed spacing.
//!
//! I. Scan the transfer fraction over E for a grid of B and keep the first B at which the
//!    leading three-body peak sits at least `min_separation_widths` of its own widths away
//!    from the two-body peak.
//! II. Choose τ where the |g r' r''⟩ exchange phase first completes a full turn.
//! III. Move E until the |r g r''⟩ phase is π at τ.
//! IV. Move B until the |r r' r''⟩ phase is 0 at τ.
//!
//! II–IV repeat until all three phase residuals are below tolerance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ExcitationPattern, GateSimulator, OperatingPoint, PatternSet, PatternSystem};
use crate::atom::{AtomModel, RydbergLevel};
use crate::basis::{build_basis, forster_defect, gate_manifolds, DEFAULT_CUTOFF_MHZ};
use crate::dynamics::{field_scan, find_peaks, uniform_grid, Peak, PHASE_THRESHOLD};
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;
use crate::hamiltonian::{Geometry, HamiltonianBuilder};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub spacing_um: f64,
    /// Interaction time of the step-I field scans.
    pub scan_tau_us: f64,
    pub electric_min: f64,
    pub electric_max: f64,
    pub scan_points: usize,
    pub magnetic_grid: Vec<f64>,
    pub min_prominence: f64,
    pub min_separation_widths: f64,
    pub tau_min_us: f64,
    pub tau_max_us: f64,
    pub tau_samples: usize,
    /// Half widths of the step-III and step-IV root brackets.
    pub electric_half_width: f64,
    pub magnetic_half_width: f64,
    pub bracket_samples: usize,
    pub tolerance_rad: f64,
    pub max_iterations: usize,
    pub with_decay: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            spacing_um: 12.5,
            scan_tau_us: 1.8,
            electric_min: 0.115,
            electric_max: 0.125,
            scan_points: 201,
            magnetic_grid: (0..=10).map(|k| 0.5 * k as f64).collect(),
            min_prominence: 0.01,
            min_separation_widths: 3.0,
            tau_min_us: 0.5,
            tau_max_us: 4.0,
            tau_samples: 400,
            electric_half_width: 0.0015,
            magnetic_half_width: 2.5,
            bracket_samples: 21,
            tolerance_rad: 0.05,
            max_iterations: 8,
            with_decay: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("optimizer: {msg}")));
        if !(8.0..=40.0).contains(&self.spacing_um) {
            return bad("spacing must lie in 8–40 µm");
        }
        if !(self.electric_max > self.electric_min && self.electric_min >= 0.0) || self.scan_points < 3 {
            return bad("electric scan window");
        }
        if self.magnetic_grid.is_empty() || self.magnetic_grid.iter().any(|b| !b.is_finite()) {
            return bad("magnetic grid");
        }
        if !(self.tau_max_us > self.tau_min_us && self.tau_min_us >= 0.0) || self.tau_samples < 2 {
            return bad("interaction time window");
        }
        if self.bracket_samples < 2 || self.max_iterations == 0 || !(self.tolerance_rad > 0.0) {
            return bad("bracketing and iteration settings");
        }
        Ok(())
    }
}

/// One line of the convergence log.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub electric_v_per_cm: f64,
    pub magnetic_g: f64,
    pub tau_us: f64,
    /// |g r' r''⟩ phase, |r g r''⟩ phase − π and |r r' r''⟩ phase, wrapped to (−π, π].
    pub residuals: [f64; 3],
    pub fidelity: f64,
}

impl ConvergenceRecord {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Peaks selected in step I.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSelection {
    pub magnetic_g: f64,
    /// Field where the |r g r''⟩ → 80S 82S pair defect vanishes.
    pub two_body_crossing: f64,
    /// Peak of the atom 1–3 pair scan.
    pub two_body: Peak,
    /// Most prominent three-atom peak outside the two-body peak.
    pub three_body: Peak,
    pub separation_widths: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerOutcome {
    pub point: OperatingPoint,
    pub selection: ResonanceSelection,
    pub log: Vec<ConvergenceRecord>,
}

impl OptimizerOutcome {
    pub fn final_record(&self) -> &ConvergenceRecord {
        self.log.last().expect("at least one iteration")
    }
}

fn wrap(phase: f64) -> f64 {
    let w = phase - 2.0 * PI * (phase / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn phase(system: &PatternSystem, fields: &FieldConfiguration, tau_us: f64, with_decay: bool) -> Result<f64> {
    let a = system.response(fields, tau_us, with_decay)?.amplitude;
    Ok(if a.norm() < PHASE_THRESHOLD { f64::NAN } else { a.arg() })
}

/// Electric field where the pair defect of |r g r''⟩ → |80S(1/2) 82S(−1/2)⟩ vanishes.
pub fn two_body_crossing(magnetic_g: f64, model: &AtomModel) -> Result<f64> {
    let t = super::rydberg_targets();
    let initial = [t[0], t[2]];
    let target = [RydbergLevel::new(80, 0, 1, 1)?, RydbergLevel::new(82, 0, 1, -1)?];
    let d0 = forster_defect(&target, &initial, &FieldConfiguration::new(0.0, magnetic_g)?, model)?;
    let d1 = forster_defect(&target, &initial, &FieldConfiguration::new(1.0, magnetic_g)?, model)?;
    let ratio = -d0 / (d1 - d0);
    if !(ratio > 0.0) {
        return Err(Error::NoResonance("pair defect does not cross zero".into()));
    }
    Ok(ratio.sqrt())
}

/// Root of `f` in [lo, hi] nearest `center`, bracketed on `samples` points and bisected.
/// Jumps larger than π between neighbouring samples are branch cuts, not roots.
fn nearest_root(
    f: &(dyn Fn(f64) -> Result<f64> + Sync),
    lo: f64,
    hi: f64,
    samples: usize,
    center: f64,
) -> Result<Option<f64>> {
    use rayon::prelude::*;
    let xs = uniform_grid(lo, hi, samples)?;
    let ys: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 1..xs.len() {
        let (ya, yb) = (ys[k - 1], ys[k]);
        if !(ya.is_finite() && yb.is_finite()) || (ya - yb).abs() > PI || ya.signum() == yb.signum() && ya != 0.0 {
            continue;
        }
        let mid = 0.5 * (xs[k - 1] + xs[k]);
        if best.map_or(true, |b| (mid - center).abs() < (0.5 * (b.0 + b.1) - center).abs()) {
            best = Some((xs[k - 1], xs[k], ya, yb));
        }
    }
    let Some((mut a, mut b, mut fa, fb)) = best else { return Ok(None) };
    if fa == 0.0 {
        return Ok(Some(a));
    }
    if fb == 0.0 {
        return Ok(Some(b));
    }
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if !fm.is_finite() {
            break;
        }
        if fm == 0.0 {
            return Ok(Some(m));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() <= 1e-12 * m.abs().max(1e-12) {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

struct Search<'a> {
    config: &'a OptimizerConfig,
    model: &'a AtomModel,
    set: PatternSet,
}

impl Search<'_> {
    fn system(&self, label: &str) -> &PatternSystem {
        let pattern = ExcitationPattern::parse(label).expect("static label");
        self.set.get(pattern).expect("interacting pattern")
    }

    fn residuals(&self, e: f64, b: f64, tau: f64) -> Result<[f64; 3]> {
        let fields = FieldConfiguration::new(e, b)?;
        let d = self.config.with_decay;
        Ok([
            wrap(phase(self.system("g_r_r"), &fields, tau, d)?),
            wrap(phase(self.system("r_g_r"), &fields, tau, d)? - PI),
            wrap(phase(self.system("r_r_r"), &fields, tau, d)?),
        ])
    }

    /// The two-body peak comes from the atom 1–3 pair alone, the only pair with an allowed
    /// P + P → S + S channel; the three-body peak is the most prominent three-atom peak outside it.
    fn step_one(&self) -> Result<ResonanceSelection> {
        let c = self.config;
        let triple = super::rydberg_targets();
        let basis = build_basis(&triple, &gate_manifolds(), DEFAULT_CUTOFF_MHZ, self.model)?;
        let builder = HamiltonianBuilder::new(&basis, &Geometry::linear_triple(c.spacing_um)?, self.model)?;
        let pair = self.system("r_g_r");
        let grid = uniform_grid(c.electric_min, c.electric_max, c.scan_points)?;
        let peaks_at = |b: &HamiltonianBuilder, basis, fixed: &FieldConfiguration| -> Result<Vec<Peak>> {
            let scan = field_scan(&grid, fixed, c.scan_tau_us, b, basis, c.with_decay)?;
            let f: Vec<f64> = scan.iter().map(|p| p.f).collect();
            Ok(find_peaks(&grid, &f, c.min_prominence))
        };
        let by_prominence = |x: &&Peak, y: &&Peak| x.prominence.total_cmp(&y.prominence);
        for &b in &c.magnetic_grid {
            let fixed = FieldConfiguration::new(0.0, b)?;
            let pair_peaks = peaks_at(&pair.builder, &pair.basis, &fixed)?;
            let Some(two) = pair_peaks.iter().max_by(by_prominence).copied() else {
                continue;
            };
            let peaks = peaks_at(&builder, &basis, &fixed)?;
            let Some(three) = peaks
                .iter()
                .filter(|p| (p.center - two.center).abs() > 0.5 * two.width)
                .max_by(by_prominence)
                .copied()
            else {
                continue;
            };
            let separation_widths = (three.center - two.center).abs() / three.width;
            if separation_widths >= c.min_separation_widths {
                return Ok(ResonanceSelection {
                    magnetic_g: b,
                    two_body_crossing: two_body_crossing(b, self.model)?,
                    two_body: two,
                    three_body: three,
                    separation_widths,
                });
            }
        }
        Err(Error::NoResonance("no magnetic field in the grid separates a three-body peak from the two-body peak".into()))
    }

    /// First τ ≥ τ_min where the unwrapped exchange phase equals a nonzero multiple of 2π.
    fn step_two(&self, e: f64, b: f64) -> Result<f64> {
        let c = self.config;
        let fields = FieldConfiguration::new(e, b)?;
        let system = self.system("g_r_r");
        let tr = system.trace(&fields, c.tau_max_us, c.tau_samples, c.with_decay)?;
        let mut prev: Option<(f64, f64)> = None;
        for (t, ph) in tr.times_us.iter().zip(&tr.phase) {
            let Some(ph) = *ph else {
                prev = None;
                continue;
            };
            if let Some((t0, p0)) = prev {
                let (k0, k1) = ((p0 / (2.0 * PI)).floor(), (ph / (2.0 * PI)).floor());
                if k0 != k1 && *t >= c.tau_min_us {
                    let turn = 2.0 * PI * k0.max(k1);
                    if turn != 0.0 {
                        let f = |tau: f64| Ok(wrap(phase(system, &fields, tau, c.with_decay)?));
                        let root = nearest_root(&f, t0, *t, 2, 0.5 * (t0 + t))?;
                        return Ok(root.unwrap_or(0.5 * (t0 + t)));
                    }
                }
            }
            prev = Some((*t, ph));
        }
        Err(Error::NoResonance(format!(
            "exchange phase does not complete a turn within {} µs at E = {e} V/cm",
            c.tau_max_us
        )))
    }

    fn step_three(&self, e: f64, b: f64, tau: f64) -> Result<f64> {
        let c = self.config;
        let system = self.system("r_g_r");
        let f = |x: f64| Ok(wrap(phase(system, &FieldConfiguration::new(x, b)?, tau, c.with_decay)? - PI));
        let lo = (e - c.electric_half_width).max(0.0);
        nearest_root(&f, lo, e + c.electric_half_width, 4 * c.bracket_samples, e)?
            .ok_or_else(|| Error::NoResonance(format!("two-body phase never reaches π near E = {e} V/cm")))
    }

    fn step_four(&self, e: f64, b: f64, tau: f64) -> Result<f64> {
        let c = self.config;
        let system = self.system("r_r_r");
        let f = |x: f64| Ok(wrap(phase(system, &FieldConfiguration::new(e, x)?, tau, c.with_decay)?));
        nearest_root(&f, b - c.magnetic_half_width, b + c.magnetic_half_width, c.bracket_samples, b)?
            .ok_or_else(|| Error::NoResonance(format!("three-body phase has no zero near B = {b} G")))
    }
}

/// Runs steps I–IV at `config.spacing_um`; `on_record` sees every iteration as it completes.
pub fn optimize_operating_point(
    config: &OptimizerConfig,
    model: &AtomModel,
    on_record: &mut dyn FnMut(&ConvergenceRecord),
) -> Result<OptimizerOutcome> {
    config.validate()?;
    let search = Search { config, model, set: PatternSet::new(config.spacing_um, model)? };
    let selection = search.step_one()?;
    let (mut e, mut b) = (selection.three_body.center, selection.magnetic_g);
    let mut log = Vec::new();
    let mut residuals = [f64::NAN; 3];
    for iteration in 1..=config.max_iterations {
        let tau = search.step_two(e, b)?;
        e = search.step_three(e, b, tau)?;
        b = search.step_four(e, b, tau)?;
        residuals = search.residuals(e, b, tau)?;
        let point = OperatingPoint::new(e, b, config.spacing_um, tau)?;
        point.check_lifetime(model)?;
        let fidelity = GateSimulator::with_patterns(point, &search.set, model, config.with_decay)?.average_fidelity().mean;
        let record = ConvergenceRecord {
            iteration,
            electric_v_per_cm: e,
            magnetic_g: b,
            tau_us: tau,
            residuals,
            fidelity,
        };
        on_record(&record);
        let done = record.max_residual() < config.tolerance_rad;
        log.push(record);
        if done {
            return Ok(OptimizerOutcome { point, selection, log });
        }
    }
    Err(Error::NotConverged { iterations: config.max_iterations, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert!((wrap(0.1 + 4.0 * PI) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn nearest_root_skips_branch_cuts() {
        let f = |x: f64| Ok(wrap(x));
        // Branch cut at π, genuine roots at 0 and 2π.
        let r = nearest_root(&f, -1.0, 7.0, 33, 5.0).unwrap().unwrap();
        assert!((r - 2.0 * PI).abs() < 1e-9);
        let r = nearest_root(&f, -1.0, 7.0, 33, 1.0).unwrap().unwrap();
        assert!(r.abs() < 1e-9);
        assert!(nearest_root(&|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 9, 0.0).unwrap().is_none());
    }

    #[test]
    fn crossing_is_field_independent_of_b() {
        let m = AtomModel::rb87();
        let a = two_body_crossing(0.0, &m).unwrap();
        let b = two_body_crossing(3.5, &m).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a > 0.1 && a < 0.13);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { spacing_um: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { magnetic_grid: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let cfg: OptimizerConfig = toml::from_str("spacing_um = 15.0\nmax_iterations = 3").unwrap();
        assert_eq!(cfg.max_iterations, 3);
        assert_eq!(cfg.scan_points, 201);
    }
}
