//! The Toffoli protocol on three atoms in a line.
//!
//! Atom 1 (left control) is excited to |r⟩ = 80P3/2(3/2) from |1⟩, atom 2 (target) to
//! |r'⟩ = 81P3/2(3/2) from |0⟩, atom 3 (right control) to |r''⟩ = 81P3/2(−3/2) from |1⟩.
//! Excitation and de-excitation pulses are ideal and instantaneous. Single-atom Stark and
//! Zeeman phases are compensated exactly, so each excitation pattern contributes the
//! interaction return amplitude of its collective Rydberg state.

mod fidelity;
mod optimize;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::{DVector, SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{AtomModel, RydbergLevel};
use crate::basis::{build_basis, gate_manifolds, CollectiveBasis, DEFAULT_CUTOFF_MHZ};
use crate::dynamics::{evolution_operator, AmplitudeVector, Trace};
use crate::error::{Error, Result};
use crate::fields::FieldConfiguration;
use crate::hamiltonian::{Geometry, HamiltonianBuilder, C64};

pub use fidelity::{
    density_matrix, fidelity_inputs, pure_state_fidelity, uhlmann_fidelity, FidelityReport, SINGLE_QUBIT_STATES,
};
pub use optimize::{
    optimize_operating_point, two_body_crossing, ConvergenceRecord, OptimizerConfig, OptimizerOutcome, ResonanceSelection,
};

/// Protocol pulses 1–8 last 10 ns each.
pub const PULSE_DURATION_US: f64 = 0.010;
pub const PULSE_COUNT: usize = 8;

pub type Amplitudes8 = SVector<C64, 8>;
pub type Operator8 = SMatrix<C64, 8, 8>;

/// Rydberg level each atom is excited to.
pub fn rydberg_targets() -> [RydbergLevel; 3] {
    [
        RydbergLevel::new(80, 1, 3, 3).expect("valid level"),
        RydbergLevel::new(81, 1, 3, 3).expect("valid level"),
        RydbergLevel::new(81, 1, 3, -3).expect("valid level"),
    ]
}

/// The three qubits, left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    Control1,
    Target,
    Control2,
}

impl Qubit {
    /// Bit weight in the computational index c1·4 + t·2 + c3.
    fn weight(self) -> usize {
        match self {
            Qubit::Control1 => 4,
            Qubit::Target => 2,
            Qubit::Control2 => 1,
        }
    }

    pub fn from_position(atom: usize) -> Result<Self> {
        match atom {
            1 => Ok(Qubit::Control1),
            2 => Ok(Qubit::Target),
            3 => Ok(Qubit::Control2),
            _ => Err(Error::InvalidConfig(format!("atom {atom} not in 1..=3"))),
        }
    }
}

/// Which atoms are in Rydberg states during the interaction interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExcitationPattern {
    pub excited: [bool; 3],
}

impl ExcitationPattern {
    /// Pattern for computational basis index c1·4 + t·2 + c3.
    pub fn for_input(index: usize) -> Self {
        let c1 = index & 4 != 0;
        let t = index & 2 != 0;
        let c3 = index & 1 != 0;
        Self { excited: [c1, !t, c3] }
    }

    pub fn excited_count(&self) -> usize {
        self.excited.iter().filter(|e| **e).count()
    }

    pub fn excited_atoms(&self) -> Vec<usize> {
        (0..3).filter(|&k| self.excited[k]).collect()
    }

    /// Selector such as `r_g_r`.
    pub fn label(&self) -> String {
        self.excited.iter().map(|e| if *e { "r" } else { "g" }).collect::<Vec<_>>().join("_")
    }

    pub fn parse(label: &str) -> Result<Self> {
        let parts: Vec<&str> = label.split('_').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!("pattern '{label}' must look like r_g_r")));
        }
        let mut excited = [false; 3];
        for (k, p) in parts.iter().enumerate() {
            excited[k] = match *p {
                "r" => true,
                "g" => false,
                _ => return Err(Error::InvalidConfig(format!("pattern '{label}' must look like r_g_r"))),
            };
        }
        Ok(Self { excited })
    }

    /// Collective Rydberg state of the excited atoms, in position order.
    pub fn rydberg_state(&self) -> Vec<RydbergLevel> {
        let t = rydberg_targets();
        self.excited_atoms().into_iter().map(|k| t[k]).collect()
    }
}

impl fmt::Display for ExcitationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Fields, spacing and interaction time of one gate run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub electric_v_per_cm: f64,
    /// Positive means antiparallel to the electric field.
    pub magnetic_g: f64,
    pub spacing_um: f64,
    pub tau_us: f64,
}

impl OperatingPoint {
    pub fn new(electric_v_per_cm: f64, magnetic_g: f64, spacing_um: f64, tau_us: f64) -> Result<Self> {
        let op = Self { electric_v_per_cm, magnetic_g, spacing_um, tau_us };
        if !(electric_v_per_cm >= 0.0) || !magnetic_g.is_finite() || !(spacing_um > 0.0) || !(tau_us > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid operating point {op:?}")));
        }
        if !(electric_v_per_cm.is_finite() && spacing_um.is_finite() && tau_us.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid operating point {op:?}")));
        }
        Ok(op)
    }

    pub fn fields(&self) -> FieldConfiguration {
        FieldConfiguration { electric_v_per_cm: self.electric_v_per_cm, magnetic_g: self.magnetic_g }
    }

    /// Eight pulses plus the interaction interval, µs.
    pub fn protocol_duration_us(&self) -> f64 {
        PULSE_COUNT as f64 * PULSE_DURATION_US + self.tau_us
    }

    /// Rejects interaction times beyond twice the shortest lifetime of the Rydberg targets.
    pub fn check_lifetime(&self, model: &AtomModel) -> Result<()> {
        let fastest = rydberg_targets()
            .iter()
            .map(|l| model.decay_rate(l.manifold()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let limit = 2.0 / fastest;
        if self.tau_us >= limit {
            return Err(Error::InvalidConfig(format!(
                "interaction time {} µs exceeds twice the shortest lifetime ({limit:.1} µs)",
                self.tau_us
            )));
        }
        Ok(())
    }
}

/// Return amplitude of a collective Rydberg state and its surviving norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternResponse {
    pub amplitude: C64,
    /// ‖ψ(τ)‖² of the Rydberg state; 1 − this is decay loss.
    pub surviving_norm: f64,
}

impl PatternResponse {
    pub const IDENTITY: Self = Self { amplitude: C64 { re: 1.0, im: 0.0 }, surviving_norm: 1.0 };

    pub fn population(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Basis and Hamiltonian pieces for one excitation pattern at a given spacing.
#[derive(Debug, Clone)]
pub struct PatternSystem {
    pub pattern: ExcitationPattern,
    pub basis: CollectiveBasis,
    pub builder: HamiltonianBuilder,
}

impl PatternSystem {
    /// Requires at least two excited atoms.
    pub fn new(pattern: ExcitationPattern, spacing_um: f64, model: &AtomModel) -> Result<Self> {
        if pattern.excited_count() < 2 {
            return Err(Error::InvalidConfig(format!("pattern {pattern} has no interacting pair")));
        }
        let basis = build_basis(&pattern.rydberg_state(), &gate_manifolds(), DEFAULT_CUTOFF_MHZ, model)?;
        let geometry = Geometry::linear_triple(spacing_um)?.subset(&pattern.excited_atoms())?;
        let builder = HamiltonianBuilder::new(&basis, &geometry, model)?;
        Ok(Self { pattern, basis, builder })
    }

    /// Initial-state amplitude after `tau_us` at `fields`.
    pub fn response(&self, fields: &FieldConfiguration, tau_us: f64, with_decay: bool) -> Result<PatternResponse> {
        let h = self.builder.at(fields, with_decay);
        let psi = crate::dynamics::propagate(&AmplitudeVector::initial(&self.basis), &h, tau_us)?;
        Ok(PatternResponse { amplitude: psi.amplitudes[self.basis.initial_index], surviving_norm: psi.norm_squared() })
    }

    /// Responses at several interaction times from one Hamiltonian.
    pub fn responses_at_times(
        &self,
        fields: &FieldConfiguration,
        times_us: &[f64],
        with_decay: bool,
    ) -> Result<Vec<PatternResponse>> {
        let h = self.builder.at(fields, with_decay);
        let psi0 = AmplitudeVector::initial(&self.basis);
        times_us
            .iter()
            .map(|&t| {
                let u = evolution_operator(&h, t)?;
                let psi: DVector<C64> = u * &psi0.amplitudes;
                Ok(PatternResponse { amplitude: psi[self.basis.initial_index], surviving_norm: psi.norm_squared() })
            })
            .collect()
    }

    /// Population and phase of the pattern's Rydberg state over [0, duration].
    pub fn trace(&self, fields: &FieldConfiguration, duration_us: f64, steps: usize, with_decay: bool) -> Result<Trace> {
        crate::dynamics::trace(&self.builder.at(fields, with_decay), &self.basis, duration_us, steps)
    }
}

/// Systems for every interacting pattern at one spacing, keyed by excitation flags.
#[derive(Debug, Clone)]
pub struct PatternSet {
    pub spacing_um: f64,
    pub systems: Vec<PatternSystem>,
}

impl PatternSet {
    pub fn new(spacing_um: f64, model: &AtomModel) -> Result<Self> {
        let systems = (0..8)
            .map(ExcitationPattern::for_input)
            .filter(|p| p.excited_count() >= 2)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|p| PatternSystem::new(p, spacing_um, model))
            .collect::<Result<_>>()?;
        Ok(Self { spacing_um, systems })
    }

    pub fn get(&self, pattern: ExcitationPattern) -> Option<&PatternSystem> {
        self.systems.iter().find(|s| s.pattern == pattern)
    }

    /// Responses of all eight computational inputs at `op`.
    pub fn responses(&self, op: &OperatingPoint, model: &AtomModel, with_decay: bool) -> Result<[PatternResponse; 8]> {
        if op.spacing_um != self.spacing_um {
            return Err(Error::InvalidConfig(format!(
                "pattern systems built for R = {} µm, operating point has {} µm",
                self.spacing_um, op.spacing_um
            )));
        }
        let out: Vec<PatternResponse> = (0..8)
            .into_par_iter()
            .map(|idx| {
                let pattern = ExcitationPattern::for_input(idx);
                match self.get(pattern) {
                    Some(system) => system.response(&op.fields(), op.tau_us, with_decay),
                    None => interaction_return_amplitude(pattern, op, model, with_decay),
                }
            })
            .collect::<Result<_>>()?;
        Ok(out.try_into().expect("eight responses"))
    }
}

/// Return amplitude of the pattern's collective Rydberg state after τ at `op`.
///
/// Patterns with a single excited atom only decay and pick up no phase.
pub fn interaction_return_amplitude(
    pattern: ExcitationPattern,
    op: &OperatingPoint,
    model: &AtomModel,
    with_decay: bool,
) -> Result<PatternResponse> {
    match pattern.excited_count() {
        0 => Ok(PatternResponse::IDENTITY),
        1 => {
            if !with_decay {
                return Ok(PatternResponse::IDENTITY);
            }
            let level = pattern.rydberg_state()[0];
            let gamma = model.decay_rate(level.manifold())?;
            let survive = (-gamma * op.tau_us).exp();
            Ok(PatternResponse { amplitude: C64::new(survive.sqrt(), 0.0), surviving_norm: survive })
        }
        _ => PatternSystem::new(pattern, op.spacing_um, model)?.response(&op.fields(), op.tau_us, with_decay),
    }
}

/// Eight computational amplitudes plus population that left the computational space.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    pub amplitudes: Amplitudes8,
    /// Rydberg population not returned by the de-excitation pulses.
    pub leakage: f64,
    /// Population lost to spontaneous and blackbody decay.
    pub decay_loss: f64,
}

impl QubitState {
    pub fn basis(index: usize) -> Self {
        let mut amplitudes = Amplitudes8::zeros();
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes, leakage: 0.0, decay_loss: 0.0 }
    }

    pub fn from_amplitudes(amplitudes: Amplitudes8) -> Self {
        Self { amplitudes, leakage: 0.0, decay_loss: 0.0 }
    }

    /// |a⟩ ⊗ |b⟩ ⊗ |c⟩ for single-qubit states in the order control 1, target, control 2.
    pub fn product(states: [[C64; 2]; 3]) -> Self {
        let mut amplitudes = Amplitudes8::zeros();
        for idx in 0..8 {
            amplitudes[idx] = states[0][(idx >> 2) & 1] * states[1][(idx >> 1) & 1] * states[2][idx & 1];
        }
        Self::from_amplitudes(amplitudes)
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

/// R_y(θ) = exp(−iθY/2) on one qubit.
pub fn single_qubit_rotation(state: &QubitState, qubit: Qubit, angle: f64) -> QubitState {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let w = qubit.weight();
    let mut out = state.clone();
    for idx in 0..8 {
        if idx & w != 0 {
            continue;
        }
        let (a0, a1) = (state.amplitudes[idx], state.amplitudes[idx | w]);
        out.amplitudes[idx] = a0 * c - a1 * s;
        out.amplitudes[idx | w] = a0 * s + a1 * c;
    }
    out
}

/// Target rotation angles of pulses 1 and 8.
///
/// Pulse 1 rotates by −π/2 and pulse 8 by +π/2; with the opposite order the π phase of the
/// |1 1 1⟩ branch becomes −X on the target, i.e. Toffoli followed by CZ on the controls.
pub const FIRST_PULSE_ANGLE: f64 = -PI / 2.0;
pub const LAST_PULSE_ANGLE: f64 = PI / 2.0;

/// The ideal Toffoli on |c1 t c3⟩: target flips when both controls are 1.
pub fn toffoli() -> Operator8 {
    let mut u = Operator8::zeros();
    for idx in 0..8 {
        u[(toffoli_image(idx), idx)] = C64::new(1.0, 0.0);
    }
    u
}

/// Output index of the Toffoli permutation.
pub fn toffoli_image(index: usize) -> usize {
    if index & 5 == 5 {
        index ^ 2
    } else {
        index
    }
}

/// Full protocol given the eight pattern responses, indexed like the computational basis.
#[derive(Debug, Clone)]
pub struct GateSimulator {
    responses: [PatternResponse; 8],
    op: Option<OperatingPoint>,
    with_decay: bool,
}

impl GateSimulator {
    /// Simulates every excitation pattern at `op`.
    pub fn new(op: OperatingPoint, model: &AtomModel, with_decay: bool) -> Result<Self> {
        Self::with_patterns(op, &PatternSet::new(op.spacing_um, model)?, model, with_decay)
    }

    /// As [`GateSimulator::new`] with prebuilt pattern systems.
    pub fn with_patterns(op: OperatingPoint, set: &PatternSet, model: &AtomModel, with_decay: bool) -> Result<Self> {
        op.check_lifetime(model)?;
        Ok(Self { responses: set.responses(&op, model, with_decay)?, op: Some(op), with_decay })
    }

    pub fn from_responses(responses: [PatternResponse; 8]) -> Self {
        Self { responses, op: None, with_decay: true }
    }

    /// Unit-magnitude responses with the protocol's target phases: π for |r g r''⟩, 0 otherwise.
    pub fn ideal() -> Self {
        let mut responses = [PatternResponse::IDENTITY; 8];
        responses[7] = PatternResponse { amplitude: C64::new(-1.0, 0.0), surviving_norm: 1.0 };
        Self::from_responses(responses)
    }

    pub fn responses(&self) -> &[PatternResponse; 8] {
        &self.responses
    }

    pub fn operating_point(&self) -> Option<&OperatingPoint> {
        self.op.as_ref()
    }

    pub fn with_decay(&self) -> bool {
        self.with_decay
    }

    /// Pulse 1, conditional excitation, interaction, de-excitation with compensated phases, pulse 8.
    pub fn run_gate(&self, input: &QubitState) -> QubitState {
        let mut state = single_qubit_rotation(input, Qubit::Target, FIRST_PULSE_ANGLE);
        for idx in 0..8 {
            let weight = state.amplitudes[idx].norm_sqr();
            let r = &self.responses[idx];
            state.amplitudes[idx] *= r.amplitude;
            state.leakage += weight * (r.surviving_norm - r.population()).max(0.0);
            state.decay_loss += weight * (1.0 - r.surviving_norm);
        }
        single_qubit_rotation(&state, Qubit::Target, LAST_PULSE_ANGLE)
    }

    /// The protocol as an 8×8 matrix on the computational space.
    pub fn operator(&self) -> Operator8 {
        let mut u = Operator8::zeros();
        for idx in 0..8 {
            u.set_column(idx, &self.run_gate(&QubitState::basis(idx)).amplitudes);
        }
        u
    }

    pub fn truth_table(&self) -> TruthTable {
        let mut table = TruthTable::default();
        for input in 0..8 {
            let out = self.run_gate(&QubitState::basis(input));
            for output in 0..8 {
                table.probabilities[input][output] = out.amplitudes[output].norm_sqr();
            }
            table.leakage[input] = out.leakage;
            table.decay_loss[input] = out.decay_loss;
        }
        table
    }

    /// Average of Tr√(√ρ_et ρ_sim √ρ_et) over the 216 product inputs against the Toffoli.
    pub fn average_fidelity(&self) -> FidelityReport {
        self.average_fidelity_against(&toffoli())
    }

    pub fn average_fidelity_against(&self, etalon: &Operator8) -> FidelityReport {
        let inputs = fidelity_inputs();
        let per_input: Vec<f64> = inputs
            .par_iter()
            .map(|(_, input)| {
                let expected = etalon * input.amplitudes;
                pure_state_fidelity(&expected, &self.run_gate(input).amplitudes)
            })
            .collect();
        FidelityReport::new(inputs.into_iter().map(|(labels, _)| labels).collect(), per_input)
    }
}

/// Output probabilities per computational input.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TruthTable {
    /// `probabilities[input][output]`.
    pub probabilities: [[f64; 8]; 8],
    pub leakage: [f64; 8],
    pub decay_loss: [f64; 8],
}

impl TruthTable {
    /// Each row divided by its sum.
    pub fn renormalized(&self) -> [[f64; 8]; 8] {
        let mut out = self.probabilities;
        for row in out.iter_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        out
    }

    /// Probability of the Toffoli image of each input.
    pub fn dominant(&self) -> [f64; 8] {
        std::array::from_fn(|i| self.probabilities[i][toffoli_image(i)])
    }

    /// Largest probability outside the Toffoli permutation.
    pub fn max_off_permutation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.probabilities.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if j != toffoli_image(i) {
                    worst = worst.max(*p);
                }
            }
        }
        worst
    }

    /// Long format: input, output, probability, renormalized probability.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let renorm = self.renormalized();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["input", "output", "probability", "probability_renormalized", "leakage", "decay_loss"])?;
        for i in 0..8 {
            for j in 0..8 {
                w.write_record([
                    basis_label(i),
                    basis_label(j),
                    format!("{:.12e}", self.probabilities[i][j]),
                    format!("{:.12e}", renorm[i][j]),
                    format!("{:.12e}", self.leakage[i]),
                    format!("{:.12e}", self.decay_loss[i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// "c1 t c3" bit string of a computational index.
pub fn basis_label(index: usize) -> String {
    format!("{}{}{}", (index >> 2) & 1, (index >> 1) & 1, index & 1)
}

pub(crate) fn plus_state() -> [C64; 2] {
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)]
}
