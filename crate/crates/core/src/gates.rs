// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Ideal gate algebra, virtual-Z frame tracking and the ZZ / CNOT composite
//! constructions.
//!
//! Conventions: `R_phi(theta) = exp(-i theta/2 (cos phi X + sin phi Y))`,
//! `Rz(theta) = exp(-i theta/2 Z)`, qubit 0 is the most significant factor
//! of a tensor product.
//!
//! A virtual Z of angle `a` advances the frame of its qubit by `a`, so a later
//! `R_phi` is emitted as `R_{phi + a}`. Logically this is the gate `Rz(-a)`
//! applied before the following pulses, followed by a residual frame
//! correction `Rz(-a)` that no Z-basis measurement can see.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::MsModel;
use crate::linalg::{identity2, kron, kron_dyn, sigma_phi, unitarity_defect, Matrix2c, Matrix4c, C64, I, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("population row {row} sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("gate {kind:?} expects {expected} targets, got {got}")]
    TargetCount { kind: GateKind, expected: usize, got: usize },
    #[error("qubit {qubit} out of range for a {n}-qubit register")]
    QubitRange { qubit: usize, n: usize },
    #[error("targets of a two-qubit gate must differ")]
    RepeatedTarget,
}

/// A square unitary matrix of dimension 2^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(pub DMatrix<C64>);

impl Unitary {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        unitarity_defect(&self.0) < tol
    }
}

impl From<Matrix2c> for Unitary {
    fn from(m: Matrix2c) -> Self {
        Self(DMatrix::from_iterator(2, 2, m.iter().copied()))
    }
}

impl From<Matrix4c> for Unitary {
    fn from(m: Matrix4c) -> Self {
        Self(DMatrix::from_iterator(4, 4, m.iter().copied()))
    }
}

pub fn r_phi(theta: f64, phi: f64) -> Matrix2c {
    let (s, c) = (0.5 * theta).sin_cos();
    identity2() * C64::new(c, 0.0) - sigma_phi(phi) * (I * s)
}

pub fn rz(theta: f64) -> Matrix2c {
    Matrix2c::new(C64::from_polar(1.0, -0.5 * theta), ZERO, ZERO, C64::from_polar(1.0, 0.5 * theta))
}

/// `exp(-i theta/2 σ_{phi_a} ⊗ σ_{phi_b})`.
pub fn ms_phased(theta: f64, phi_a: f64, phi_b: f64) -> Matrix4c {
    let (s, c) = (0.5 * theta).sin_cos();
    Matrix4c::identity() * C64::new(c, 0.0) - kron(&sigma_phi(phi_a), &sigma_phi(phi_b)) * (I * s)
}

/// `exp(-i theta/2 X ⊗ X)`.
pub fn ms_xx(theta: f64) -> Matrix4c {
    ms_phased(theta, 0.0, 0.0)
}

/// `exp(-i theta/2 Z ⊗ Z)`.
pub fn zz(theta: f64) -> Matrix4c {
    let a = C64::from_polar(1.0, -0.5 * theta);
    let b = C64::from_polar(1.0, 0.5 * theta);
    Matrix4c::from_diagonal(&nalgebra::Vector4::new(a, b, b, a))
}

/// CNOT with control on qubit 0.
pub fn cnot() -> Matrix4c {
    let mut m = Matrix4c::zeros();
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(3, 2)] = ONE;
    m[(2, 3)] = ONE;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RPhi,
    RzVirtual,
    MsXx,
    ZzComposite,
    CnotComposite,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::RPhi | GateKind::RzVirtual => 1,
            _ => 2,
        }
    }

    fn mnemonic(self) -> &'static str {
        match self {
            GateKind::RPhi => "RPHI",
            GateKind::RzVirtual => "RZ",
            GateKind::MsXx => "MS",
            GateKind::ZzComposite => "ZZ",
            GateKind::CnotComposite => "CNOT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Propagation {
    /// Both tones in one beam; insensitive to motion.
    Co,
    /// One IA tone against the global beam.
    Counter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateElement {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub theta: f64,
    /// Rotation axis for `RPhi`; relative phase Δφ between the two ions for
    /// `MsXx`. Unused otherwise.
    pub phi: f64,
    pub propagation: Propagation,
}

impl GateElement {
    pub fn r_phi(q: usize, theta: f64, phi: f64) -> Self {
        Self { kind: GateKind::RPhi, targets: vec![q], theta, phi, propagation: Propagation::Co }
    }

    pub fn r_phi_counter(q: usize, theta: f64, phi: f64) -> Self {
        Self { propagation: Propagation::Counter, ..Self::r_phi(q, theta, phi) }
    }

    pub fn rz_virtual(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::RzVirtual, targets: vec![q], theta, phi: 0.0, propagation: Propagation::Co }
    }

    pub fn ms(a: usize, b: usize, theta: f64, delta_phi: f64) -> Self {
        Self { kind: GateKind::MsXx, targets: vec![a, b], theta, phi: delta_phi, propagation: Propagation::Counter }
    }

    pub fn zz(a: usize, b: usize, theta: f64) -> Self {
        Self { kind: GateKind::ZzComposite, targets: vec![a, b], theta, phi: 0.0, propagation: Propagation::Counter }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::CnotComposite, targets: vec![control, target], theta: 0.0, phi: 0.0, propagation: Propagation::Co }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<(), GateError> {
        let expected = self.kind.arity();
        if self.targets.len() != expected {
            return Err(GateError::TargetCount { kind: self.kind, expected, got: self.targets.len() });
        }
        if let Some(&q) = self.targets.iter().find(|&&q| q >= n_qubits) {
            return Err(GateError::QubitRange { qubit: q, n: n_qubits });
        }
        if expected == 2 && self.targets[0] == self.targets[1] {
            return Err(GateError::RepeatedTarget);
        }
        Ok(())
    }

    /// Primitive elements (`RPhi`, `RzVirtual`, `MsXx`) implementing this one.
    pub fn expand(&self) -> Vec<GateElement> {
        match self.kind {
            GateKind::ZzComposite => {
                let (a, b) = (self.targets[0], self.targets[1]);
                vec![
                    GateElement::r_phi_counter(a, FRAC_PI_2, FRAC_PI_2),
                    GateElement::r_phi_counter(b, FRAC_PI_2, FRAC_PI_2),
                    GateElement::ms(a, b, self.theta, 0.0),
                    GateElement::r_phi_counter(a, -FRAC_PI_2, FRAC_PI_2),
                    GateElement::r_phi_counter(b, -FRAC_PI_2, FRAC_PI_2),
                ]
            }
            GateKind::CnotComposite => cnot_elements(self.targets[0], self.targets[1])
                .iter()
                .flat_map(GateElement::expand)
                .collect(),
            _ => vec![self.clone()],
        }
    }
}

/// The composite CNOT: `Ry(π)` on the control and `Ry(π/2)` on the target,
/// `ZZ(π/2)`, then `Rz(π/2)` and `Ry(-π)` on the control and `Ry(-π/2)`,
/// `Rx(-π/2)` on the target.
///
/// `Rz(π/2)` is a virtual Z of `-π/2` under the frame convention above.
fn cnot_elements(c: usize, t: usize) -> Vec<GateElement> {
    vec![
        GateElement::r_phi(c, PI, FRAC_PI_2),
        GateElement::r_phi(t, FRAC_PI_2, FRAC_PI_2),
        GateElement::zz(c, t, FRAC_PI_2),
        GateElement::rz_virtual(c, -FRAC_PI_2),
        GateElement::r_phi(c, -PI, FRAC_PI_2),
        GateElement::r_phi(t, -FRAC_PI_2, FRAC_PI_2),
        GateElement::r_phi(t, -FRAC_PI_2, 0.0),
    ]
}

fn fmt_f64(x: f64) -> String {
    // `{}` prints the shortest representation that parses back exactly.
    format!("{x}")
}

impl fmt::Display for GateElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.mnemonic())?;
        for q in &self.targets {
            write!(f, " q{q}")?;
        }
        match self.kind {
            GateKind::RPhi => {
                write!(f, " theta={} phi={}", fmt_f64(self.theta), fmt_f64(self.phi))?;
                if self.propagation == Propagation::Counter {
                    write!(f, " prop=counter")?;
                }
                Ok(())
            }
            GateKind::RzVirtual | GateKind::ZzComposite => write!(f, " theta={}", fmt_f64(self.theta)),
            GateKind::MsXx => write!(f, " theta={} phi={}", fmt_f64(self.theta), fmt_f64(self.phi)),
            GateKind::CnotComposite => Ok(()),
        }
    }
}

/// An ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub n_qubits: usize,
    pub elements: Vec<GateElement>,
}

impl GateSequence {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, elements: Vec::new() }
    }

    pub fn push(&mut self, el: GateElement) -> Result<&mut Self, GateError> {
        el.validate(self.n_qubits)?;
        self.elements.push(el);
        Ok(self)
    }

    pub fn expanded(&self) -> GateSequence {
        GateSequence {
            n_qubits: self.n_qubits,
            elements: self.elements.iter().flat_map(GateElement::expand).collect(),
        }
    }

    /// Parse the line format. The register size is one more than the
    /// largest qubit index mentioned, or `min_qubits` if larger.
    pub fn parse(text: &str, min_qubits: usize) -> Result<Self, GateError> {
        let mut elements = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            elements.push(parse_line(line).map_err(|msg| GateError::Parse { line: k + 1, msg })?);
        }
        let n_qubits = elements
            .iter()
            .flat_map(|e| e.targets.iter().map(|q| q + 1))
            .max()
            .unwrap_or(0)
            .max(min_qubits);
        let mut seq = GateSequence::new(n_qubits);
        for el in elements {
            seq.push(el)?;
        }
        Ok(seq)
    }
}

impl fmt::Display for GateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for el in &self.elements {
            writeln!(f, "{el}")?;
        }
        Ok(())
    }
}

impl FromStr for GateSequence {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, 0)
    }
}

fn parse_line(line: &str) -> Result<GateElement, String> {
    let mut words = line.split_whitespace();
    let kind = match words.next().unwrap_or("") {
        "RPHI" => GateKind::RPhi,
        "RZ" => GateKind::RzVirtual,
        "MS" => GateKind::MsXx,
        "ZZ" => GateKind::ZzComposite,
        "CNOT" => GateKind::CnotComposite,
        other => return Err(format!("unknown gate '{other}'")),
    };
    let mut targets = Vec::new();
    let mut theta = None;
    let mut phi = None;
    let mut propagation = None;
    for w in words {
        if let Some(q) = w.strip_prefix('q') {
            targets.push(q.parse::<usize>().map_err(|_| format!("bad qubit '{w}'"))?);
        } else if let Some((key, value)) = w.split_once('=') {
            let num = || value.parse::<f64>().map_err(|_| format!("bad number '{value}'"));
            match key {
                "theta" => theta = Some(num()?),
                "phi" => phi = Some(num()?),
                "prop" => {
                    propagation = Some(match value {
                        "co" => Propagation::Co,
                        "counter" => Propagation::Counter,
                        _ => return Err(format!("bad propagation '{value}'")),
                    })
                }
                _ => return Err(format!("unknown key '{key}'")),
            }
        } else {
            return Err(format!("unexpected token '{w}'"));
        }
    }
    let default_prop = match kind {
        GateKind::MsXx | GateKind::ZzComposite => Propagation::Counter,
        _ => Propagation::Co,
    };
    let needs_theta = kind != GateKind::CnotComposite;
    if needs_theta && theta.is_none() {
        return Err("missing theta".into());
    }
    Ok(GateElement {
        kind,
        targets,
        theta: theta.unwrap_or(0.0),
        phi: phi.unwrap_or(0.0),
        propagation: propagation.unwrap_or(default_prop),
    })
}

/// Embed a single-qubit operator on qubit `q` of an `n`-qubit register.
pub fn embed1(op: &Matrix2c, q: usize, n: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::identity(1, 1);
    for k in 0..n {
        let factor = if k == q {
            DMatrix::from_iterator(2, 2, op.iter().copied())
        } else {
            DMatrix::identity(2, 2)
        };
        out = kron_dyn(&out, &factor);
    }
    out
}

/// Embed a two-qubit operator (first factor on `a`) on qubits `a`, `b`.
pub fn embed2(op: &Matrix4c, a: usize, b: usize, n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let bit = |q: usize| n - 1 - q;
    DMatrix::from_fn(dim, dim, |r, c| {
        let others = !((1 << bit(a)) | (1 << bit(b)));
        if r & others != c & others {
            return ZERO;
        }
        let sub = |x: usize| ((x >> bit(a)) & 1) * 2 + ((x >> bit(b)) & 1);
        op[(sub(r), sub(c))]
    })
}

/// Logical unitary of an ideal element (virtual Z included as `Rz(-theta)`).
pub fn element_unitary(el: &GateElement, n: usize) -> DMatrix<C64> {
    match el.kind {
        GateKind::RPhi => embed1(&r_phi(el.theta, el.phi), el.targets[0], n),
        GateKind::RzVirtual => embed1(&rz(-el.theta), el.targets[0], n),
        GateKind::MsXx => embed2(&ms_phased(el.theta, el.phi, 0.0), el.targets[0], el.targets[1], n),
        GateKind::ZzComposite => embed2(&zz(el.theta), el.targets[0], el.targets[1], n),
        GateKind::CnotComposite => el
            .expand()
            .iter()
            .fold(DMatrix::identity(1 << n, 1 << n), |acc, e| element_unitary(e, n) * acc),
    }
}

pub fn sequence_unitary(seq: &GateSequence) -> Unitary {
    let dim = 1usize << seq.n_qubits;
    Unitary(
        seq.elements
            .iter()
            .fold(DMatrix::identity(dim, dim), |acc, e| element_unitary(e, seq.n_qubits) * acc),
    )
}

/// A composite gate as a primitive sequence on qubits 0 and 1 plus its net
/// unitary.
#[derive(Debug, Clone)]
pub struct Composite {
    pub sequence: GateSequence,
    pub unitary: Unitary,
}

/// `Ry(π/2)⊗Ry(π/2)`, `MS_xx(theta)`, `Ry(-π/2)⊗Ry(-π/2)` in time order.
/// The wrappers are counter-propagating.
pub fn zz_composite(theta: f64) -> Composite {
    let sequence = GateSequence { n_qubits: 2, elements: GateElement::zz(0, 1, theta).expand() };
    let unitary = sequence_unitary(&sequence);
    Composite { sequence, unitary }
}

pub fn cnot_composite() -> Composite {
    let sequence = GateSequence { n_qubits: 2, elements: cnot_elements(0, 1) };
    let unitary = sequence_unitary(&sequence);
    Composite { sequence, unitary }
}

/// A physical waveform after frame tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pulse {
    Rotation { qubit: usize, theta: f64, phi: f64, propagation: Propagation },
    Ms { a: usize, b: usize, theta: f64, phi_a: f64, phi_b: f64 },
}

/// Per-qubit accumulated virtual-Z phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTracker {
    pub accumulated_phase: Vec<f64>,
}

impl FrameTracker {
    pub fn new(n_qubits: usize) -> Self {
        Self { accumulated_phase: vec![0.0; n_qubits] }
    }

    /// Pulses emitted for `el`. Virtual Z emits nothing. Composite ZZ keeps
    /// its inner MS at the fixed calibrated phase and leaves its wrappers
    /// unframed; the frames carry on to later gates.
    pub fn apply(&mut self, el: &GateElement) -> Vec<Pulse> {
        match el.kind {
            GateKind::RPhi => vec![Pulse::Rotation {
                qubit: el.targets[0],
                theta: el.theta,
                phi: el.phi + self.accumulated_phase[el.targets[0]],
                propagation: el.propagation,
            }],
            GateKind::RzVirtual => {
                self.accumulated_phase[el.targets[0]] += el.theta;
                Vec::new()
            }
            GateKind::MsXx => {
                let (a, b) = (el.targets[0], el.targets[1]);
                vec![Pulse::Ms {
                    a,
                    b,
                    theta: el.theta,
                    phi_a: el.phi + self.accumulated_phase[a],
                    phi_b: self.accumulated_phase[b],
                }]
            }
            GateKind::ZzComposite => el.expand().into_iter().map(|e| raw_pulse(&e)).collect(),
            GateKind::CnotComposite => cnot_elements(el.targets[0], el.targets[1])
                .iter()
                .flat_map(|e| self.apply(e))
                .collect(),
        }
    }

    /// `Rz(-phase)` on every qubit: takes the physical frame back to the
    /// logical one.
    pub fn correction(&self) -> DMatrix<C64> {
        let n = self.accumulated_phase.len();
        self.accumulated_phase
            .iter()
            .enumerate()
            .fold(DMatrix::identity(1 << n, 1 << n), |acc, (q, &a)| embed1(&rz(-a), q, n) * acc)
    }
}

fn raw_pulse(el: &GateElement) -> Pulse {
    match el.kind {
        GateKind::RPhi => Pulse::Rotation { qubit: el.targets[0], theta: el.theta, phi: el.phi, propagation: el.propagation },
        GateKind::MsXx => Pulse::Ms { a: el.targets[0], b: el.targets[1], theta: el.theta, phi_a: el.phi, phi_b: 0.0 },
        _ => unreachable!("only primitives reach raw_pulse"),
    }
}

/// Frame-tracked pulse list for `seq`, plus the final tracker.
pub fn compile(seq: &GateSequence) -> (Vec<Pulse>, FrameTracker) {
    let mut tracker = FrameTracker::new(seq.n_qubits);
    let pulses = seq.elements.iter().flat_map(|e| tracker.apply(e)).collect();
    (pulses, tracker)
}

/// Error model applied when turning pulses into unitaries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PulseModel {
    /// Field crosstalk between the two MS targets; `base_angle` is ignored in
    /// favor of each pulse's own angle.
    pub ms_crosstalk: Option<MsModel>,
    /// Multiplies every MS angle.
    pub ms_angle_scale: Option<f64>,
    /// Apply the MS interference factor to counter-propagating single-qubit
    /// pulses on the MS targets, assuming both targets are driven in phase.
    pub counter_crosstalk: bool,
}

pub fn pulse_unitary(p: &Pulse, n: usize, model: &PulseModel) -> DMatrix<C64> {
    match *p {
        Pulse::Rotation { qubit, theta, phi, propagation } => {
            let mut angle = theta;
            if let (true, Propagation::Counter, Some(m)) = (model.counter_crosstalk, propagation, model.ms_crosstalk) {
                angle *= m.counter_single_factor(qubit);
            }
            embed1(&r_phi(angle, phi), qubit, n)
        }
        Pulse::Ms { a, b, theta, phi_a, phi_b } => {
            let mut angle = theta * model.ms_angle_scale.unwrap_or(1.0);
            if let Some(m) = model.ms_crosstalk {
                angle *= m.interference_factor(phi_a - phi_b);
            }
            embed2(&ms_phased(angle, phi_a, phi_b), a, b, n)
        }
    }
}

pub fn pulses_unitary(pulses: &[Pulse], n: usize, model: &PulseModel) -> Unitary {
    let dim = 1usize << n;
    Unitary(pulses.iter().fold(DMatrix::identity(dim, dim), |acc, p| pulse_unitary(p, n, model) * acc))
}

/// `(|tr(U†V)|²/d + 1)/(d + 1)`.
pub fn average_gate_fidelity(u: &Unitary, v: &Unitary) -> Result<f64, GateError> {
    if u.dim() != v.dim() {
        return Err(GateError::DimensionMismatch(u.dim(), v.dim()));
    }
    let d = u.dim() as f64;
    let t = (u.0.adjoint() * &v.0).trace().norm_sqr();
    Ok((t / d + 1.0) / (d + 1.0))
}

/// `|tr(U†V)|²/d²`.
pub fn process_fidelity(u: &Unitary, v: &Unitary) -> Result<f64, GateError> {
    if u.dim() != v.dim() {
        return Err(GateError::DimensionMismatch(u.dim(), v.dim()));
    }
    let d = u.dim() as f64;
    Ok((u.0.adjoint() * &v.0).trace().norm_sqr() / (d * d))
}

/// Ideal CNOT (control qubit 0) output for each computational input.
pub const CNOT_OUTPUT: [usize; 4] = [0, 1, 3, 2];

/// `pop[input][output] = |<output|U|input>|²`.
pub fn truth_table(u: &Unitary) -> [[f64; 4]; 4] {
    let mut pop = [[0.0; 4]; 4];
    for (input, row) in pop.iter_mut().enumerate() {
        for (output, p) in row.iter_mut().enumerate() {
            *p = u.0[(output, input)].norm_sqr();
        }
    }
    pop
}

/// Mean population on the ideal CNOT output over the four basis inputs.
pub fn truth_table_fidelity(pop: &[[f64; 4]; 4]) -> Result<f64, GateError> {
    for (row, r) in pop.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(GateError::RowNotNormalized { row, sum });
        }
    }
    Ok(pop.iter().zip(CNOT_OUTPUT).map(|(r, out)| r[out]).sum::<f64>() / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_y, pauli_z, phase_insensitive_distance};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn zz_from_paulis(theta: f64) -> Matrix4c {
        let zz = kron(&pauli_z(), &pauli_z());
        let (s, c) = (0.5 * theta).sin_cos();
        Matrix4c::identity() * C64::new(c, 0.0) - zz * (I * s)
    }

    fn close2(a: &Matrix2c, b: &Matrix2c, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() < tol)
    }

    fn dyn4(m: &Matrix4c) -> DMatrix<C64> {
        DMatrix::from_iterator(4, 4, m.iter().copied())
    }

    #[test]
    fn r_phi_examples() {
        assert!(close2(&r_phi(PI, 0.0), &(pauli_x() * -I), 1e-15));
        let expect = (identity2() - pauli_y() * I) * C64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close2(&r_phi(FRAC_PI_2, FRAC_PI_2), &expect, 1e-15));
        assert!(close2(&r_phi(0.0, 1.234), &identity2(), 1e-15));
    }

    #[test]
    fn ms_xx_examples() {
        assert!((ms_xx(0.0) - Matrix4c::identity()).iter().all(|z| z.norm() < 1e-15));
        let xx = kron(&pauli_x(), &pauli_x());
        let expect = (Matrix4c::identity() - xx * I) * C64::new(FRAC_1_SQRT_2, 0.0);
        assert!((ms_xx(FRAC_PI_2) - expect).iter().all(|z| z.norm() < 1e-15));
        let col = ms_xx(FRAC_PI_2).column(0).into_owned();
        assert!((col[0] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((col[3] - C64::new(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!(col[1].norm() < 1e-15 && col[2].norm() < 1e-15);
    }

    #[test]
    fn zz_composite_matches_three_matrix_product() {
        // Oracle: multiply the three 4x4 factors directly.
        let theta = FRAC_PI_2;
        let ry = |a: f64| r_phi(a, FRAC_PI_2);
        let oracle = kron(&ry(-FRAC_PI_2), &ry(-FRAC_PI_2)) * ms_xx(theta) * kron(&ry(FRAC_PI_2), &ry(FRAC_PI_2));
        let c = zz_composite(theta);
        assert!(phase_insensitive_distance(&c.unitary.0, &dyn4(&oracle)) < 1e-12);
        // Diagonal with e^{-iπ/4} on 00, 11 and e^{+iπ/4} on 01, 10.
        let u = &c.unitary.0;
        let ref_phase = u[(0, 0)];
        for (k, sign) in [(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
            let expected = C64::from_polar(1.0, sign * PI / 4.0);
            let rel = u[(k, k)] / ref_phase * C64::from_polar(1.0, -PI / 4.0);
            assert!((rel - expected).norm() < 1e-12, "k={k}");
        }
        assert!(u.iter().enumerate().filter(|(i, _)| i % 5 != 0).all(|(_, z)| z.norm() < 1e-12));
    }

    #[test]
    fn zz_composite_zero_is_identity() {
        assert!(phase_insensitive_distance(&zz_composite(0.0).unitary.0, &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn zz_commutes_with_local_z() {
        let (a, b) = (0.7, -1.3);
        let lhs = kron(&rz(a), &rz(b)) * zz(0.9) * kron(&rz(-a), &rz(-b));
        assert!((lhs - zz(0.9)).iter().all(|z| z.norm() < 1e-12));
        assert!((zz(0.9) - zz_from_paulis(0.9)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn cnot_composite_is_cnot() {
        let c = cnot_composite();
        let f = process_fidelity(&c.unitary, &cnot().into()).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
        let tt = truth_table(&c.unitary);
        assert!((tt[0][0] - 1.0).abs() < 1e-12);
        assert!((tt[2][3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_cnot_loses_fidelity() {
        let seq = GateSequence { n_qubits: 2, elements: GateElement::cnot(0, 1).expand() };
        let (pulses, _) = compile(&seq);
        let model = PulseModel { ms_angle_scale: Some(1.05), ..Default::default() };
        let u = pulses_unitary(&pulses, 2, &model);
        let f = truth_table_fidelity(&truth_table(&u)).unwrap();
        assert!(f < 1.0 - 1e-6);
    }

    #[test]
    fn frame_examples() {
        let mut fr = FrameTracker::new(1);
        assert!(fr.apply(&GateElement::rz_virtual(0, FRAC_PI_2)).is_empty());
        match fr.apply(&GateElement::r_phi(0, 1.0, 0.0))[0] {
            Pulse::Rotation { phi, .. } => assert!((phi - FRAC_PI_2).abs() < 1e-15),
            _ => unreachable!(),
        }
        let mut fr = FrameTracker::new(1);
        fr.apply(&GateElement::rz_virtual(0, PI));
        fr.apply(&GateElement::rz_virtual(0, PI));
        match fr.apply(&GateElement::r_phi(0, 1.0, 0.3))[0] {
            Pulse::Rotation { phi, .. } => {
                let d = (phi - 0.3).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) < 1e-12)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn zz_ignores_frames_but_logical_unitary_is_consistent() {
        for alpha in [0.0, 0.4, -2.1, 3.0] {
            let mut seq = GateSequence::new(2);
            seq.push(GateElement::rz_virtual(0, alpha)).unwrap();
            seq.push(GateElement::zz(0, 1, FRAC_PI_2)).unwrap();
            let (pulses, tracker) = compile(&seq);
            let physical = pulses_unitary(&pulses, 2, &PulseModel::default());
            // The emitted ZZ is identical regardless of the preceding frame.
            assert!(phase_insensitive_distance(&physical.0, &dyn4(&zz(FRAC_PI_2))) < 1e-12);
            let logical = sequence_unitary(&seq);
            let reconstructed = tracker.correction() * &physical.0;
            assert!(phase_insensitive_distance(&reconstructed, &logical.0) < 1e-12);
        }
    }

    #[test]
    fn compiled_circuits_reproduce_logical_unitaries() {
        let text = "RZ q0 theta=0.3\nRPHI q1 theta=0.7 phi=0.2\nMS q0 q1 theta=1.1 phi=0.4\nRZ q1 theta=-1.7\nCNOT q0 q1\nRPHI q0 theta=2 phi=1\n";
        let seq: GateSequence = text.parse().unwrap();
        let (pulses, tracker) = compile(&seq);
        let physical = pulses_unitary(&pulses, 2, &PulseModel::default());
        let logical = sequence_unitary(&seq);
        assert!(phase_insensitive_distance(&(tracker.correction() * &physical.0), &logical.0) < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let i2: Unitary = identity2().into();
        let x: Unitary = pauli_x().into();
        assert!((average_gate_fidelity(&i2, &i2).unwrap() - 1.0).abs() < 1e-15);
        assert!((average_gate_fidelity(&i2, &x).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let zz4: Unitary = kron(&pauli_z(), &pauli_z()).into();
        assert!((average_gate_fidelity(&Unitary::identity(4), &zz4).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(average_gate_fidelity(&i2, &zz4), Err(GateError::DimensionMismatch(2, 4)));
        let phased = Unitary(x.0.map(|z| z * C64::from_polar(1.0, 0.8)));
        assert!((average_gate_fidelity(&x, &phased).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn truth_table_examples() {
        let mut perm = [[0.0; 4]; 4];
        for (i, &o) in CNOT_OUTPUT.iter().enumerate() {
            perm[i][o] = 1.0;
        }
        assert_eq!(truth_table_fidelity(&perm).unwrap(), 1.0);
        assert_eq!(truth_table_fidelity(&[[0.25; 4]; 4]).unwrap(), 0.25);
        let mut bad = perm;
        bad[2][0] = 0.1;
        assert!(matches!(truth_table_fidelity(&bad), Err(GateError::RowNotNormalized { row: 2, .. })));
    }

    #[test]
    fn text_format_round_trip() {
        let c = cnot_composite();
        let text = c.sequence.to_string();
        let back = GateSequence::parse(&text, 2).unwrap();
        assert_eq!(back, c.sequence);
        let seq = GateSequence::parse("RPHI q0 theta=1.5708 phi=0.0\nZZ q0 q1 theta=1.5708 # comment\n\nCNOT q1 q0\n", 0).unwrap();
        assert_eq!(seq.n_qubits, 2);
        assert_eq!(seq.elements.len(), 3);
        assert!(GateSequence::parse("FOO q0", 0).is_err());
        assert!(matches!(GateSequence::parse("RPHI q0 phi=1", 0), Err(GateError::Parse { line: 1, .. })));
        assert!(matches!(GateSequence::parse("ZZ q0 q0 theta=1", 0), Err(GateError::RepeatedTarget)));
    }

    #[test]
    fn embed2_respects_qubit_order() {
        let swapped = embed2(&cnot(), 1, 0, 2);
        // control on qubit 1: |01> -> |11>
        assert_eq!(swapped[(3, 1)], ONE);
        let three = embed2(&kron(&pauli_x(), &identity2()), 0, 2, 3);
        assert_eq!(three[(4, 0)], ONE);
    }
}
