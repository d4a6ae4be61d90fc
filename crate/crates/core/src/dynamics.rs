// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-qubit Raman dynamics and the effective MS propagator.
//!
//! In the qubit rotating frame with the rotating-wave approximation a set of
//! channels gives
//!
//! ```text
//! H(t) = Σ_c (Ω_c/2) [cos(2π δ_c t + φ_c) X + sin(2π δ_c t + φ_c) Y]
//! ```
//!
//! with `Ω_c` a cycle rate, so a lone resonant channel drives
//! `P1(t) = sin²(π Ω t)`. Time is in µs and rates in Hz; the integrator works
//! in rad/µs.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{epsilon, BeamProfile, ChainConfig, ChainError, DriveSet};
use crate::freq_plan::{enumerate_raman_channels, ChannelOptions, FrequencyPlan, RamanChannel};
use crate::gates::ms_phased;
use crate::linalg::{Matrix2c, Matrix4c, C64, ZERO};

/// Minimum number of integration steps per unit of `1 / max(|Ω|, |δ|)`.
pub const STEPS_PER_CYCLE: f64 = 50.0;
const HZ_TO_PER_US: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("time step {dt_us} µs exceeds the bound {max_dt_us} µs")]
    StepTooCoarse { dt_us: f64, max_dt_us: f64 },
    #[error("duration must be positive and finite")]
    InvalidDuration,
    #[error("sample times must be non-negative and non-decreasing")]
    InvalidSampleTimes,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("invalid MS model: {0}")]
    InvalidModel(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amplitudes: [C64; 2],
}

impl QubitState {
    pub fn ground() -> Self {
        Self { amplitudes: [C64::new(1.0, 0.0), ZERO] }
    }

    pub fn norm(&self) -> f64 {
        (self.amplitudes[0].norm_sqr() + self.amplitudes[1].norm_sqr()).sqrt()
    }

    pub fn p1(&self) -> f64 {
        self.amplitudes[1].norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times_us: Vec<f64>,
    /// P(|1>) at each time, starting from |0>.
    pub populations: Vec<f64>,
    pub final_unitary: Matrix2c,
}

impl Trajectory {
    pub fn final_state(&self) -> QubitState {
        QubitState { amplitudes: [self.final_unitary[(0, 0)], self.final_unitary[(1, 0)]] }
    }
}

/// Largest step (µs) allowed for `channels`; infinite when nothing drives.
pub fn max_stable_dt_us(channels: &[RamanChannel]) -> f64 {
    let fastest = channels
        .iter()
        .map(|c| c.rabi_amplitude_hz.norm().max(c.two_photon_detuning_hz.abs()))
        .fold(0.0, f64::max);
    if fastest == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (STEPS_PER_CYCLE * fastest * HZ_TO_PER_US)
    }
}

struct Term {
    /// π |Ω| in rad/µs.
    half_rate: f64,
    /// 2π δ in rad/µs.
    angular_detuning: f64,
    phase: f64,
}

struct Hamiltonian {
    terms: Vec<Term>,
}

impl Hamiltonian {
    fn new(channels: &[RamanChannel]) -> Self {
        let terms = channels
            .iter()
            .map(|c| Term {
                half_rate: PI * c.rabi_amplitude_hz.norm() * HZ_TO_PER_US,
                angular_detuning: 2.0 * PI * c.two_photon_detuning_hz * HZ_TO_PER_US,
                phase: c.rabi_amplitude_hz.arg(),
            })
            .collect();
        Self { terms }
    }

    /// Upper off-diagonal element `H[0][1]`; `H[1][0]` is its conjugate.
    fn coupling(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|term| C64::from_polar(term.half_rate, -(term.angular_detuning * t + term.phase)))
            .sum()
    }

    /// Bloch vector `(x, y)` of `H(t) = x X + y Y`.
    fn field(&self, t: f64) -> (f64, f64) {
        let h = self.coupling(t);
        (h.re, -h.im)
    }

    /// Fourth-order Magnus step with two Gauss points. The step generator is
    /// a real combination of Paulis, so its exponential is exactly unitary.
    fn step(&self, t: f64, dt: f64, u: &Matrix2c) -> Matrix2c {
        let offset = 3f64.sqrt() / 6.0;
        let (x1, y1) = self.field(t + (0.5 - offset) * dt);
        let (x2, y2) = self.field(t + (0.5 + offset) * dt);
        // (n2 × n1) has only a z component for in-plane fields.
        let cross_z = x2 * y1 - y2 * x1;
        let m = [0.5 * dt * (x1 + x2), 0.5 * dt * (y1 + y2), offset * dt * dt * cross_z];
        let angle = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        if angle == 0.0 {
            return *u;
        }
        let (s, c) = angle.sin_cos();
        let k = s / angle;
        let step = Matrix2c::new(
            C64::new(c, -k * m[2]),
            C64::new(-k * m[1], -k * m[0]),
            C64::new(k * m[1], -k * m[0]),
            C64::new(c, k * m[2]),
        );
        step * u
    }
}

fn check_step(channels: &[RamanChannel], dt_us: f64) -> Result<(), DynamicsError> {
    let max_dt_us = max_stable_dt_us(channels);
    if !(dt_us > 0.0 && dt_us.is_finite()) || dt_us > max_dt_us * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooCoarse { dt_us, max_dt_us });
    }
    Ok(())
}

/// Fixed-step integration from |0> over `duration_us`, recording P1 after every step.
/// The step is shrunk to `duration / ceil(duration / dt)`.
pub fn evolve_channels(channels: &[RamanChannel], duration_us: f64, dt_us: f64) -> Result<Trajectory, DynamicsError> {
    if !(duration_us.is_finite() && duration_us > 0.0) {
        return Err(DynamicsError::InvalidDuration);
    }
    check_step(channels, dt_us)?;
    let n = (duration_us / dt_us).ceil().max(1.0) as usize;
    let h = duration_us / n as f64;
    let ham = Hamiltonian::new(channels);
    let mut u = Matrix2c::identity();
    let mut times_us = Vec::with_capacity(n + 1);
    let mut populations = Vec::with_capacity(n + 1);
    times_us.push(0.0);
    populations.push(0.0);
    for k in 0..n {
        let t = k as f64 * h;
        u = ham.step(t, h, &u);
        times_us.push((k + 1) as f64 * h);
        populations.push(u[(1, 0)].norm_sqr().clamp(0.0, 1.0));
    }
    Ok(Trajectory { times_us, populations, final_unitary: u })
}

/// Integrate through the (non-decreasing) `sample_times_us`, recording P1 only
/// at those times. Each gap is split into `ceil(gap / dt)` equal steps.
pub fn evolve_channels_sampled(channels: &[RamanChannel], sample_times_us: &[f64], dt_us: f64) -> Result<Trajectory, DynamicsError> {
    let ordered = sample_times_us.iter().all(|t| t.is_finite() && *t >= 0.0)
        && sample_times_us.windows(2).all(|w| w[1] >= w[0]);
    if !ordered {
        return Err(DynamicsError::InvalidSampleTimes);
    }
    check_step(channels, dt_us)?;
    let ham = Hamiltonian::new(channels);
    let mut u = Matrix2c::identity();
    let mut t = 0.0;
    let mut populations = Vec::with_capacity(sample_times_us.len());
    for &target in sample_times_us {
        let gap = target - t;
        if gap > 0.0 {
            let n = (gap / dt_us).ceil().max(1.0) as usize;
            let h = gap / n as f64;
            for k in 0..n {
                u = ham.step(t + k as f64 * h, h, &u);
            }
            t = target;
        }
        populations.push(u[(1, 0)].norm_sqr().clamp(0.0, 1.0));
    }
    Ok(Trajectory { times_us: sample_times_us.to_vec(), populations, final_unitary: u })
}

/// Independent evolution of every ion under the drive set; no entangling
/// terms arise from co-propagating single-qubit drive.
pub fn parallel_single_qubit_evolution(
    config: &ChainConfig,
    profile: &BeamProfile,
    drives: &DriveSet,
    plan: &FrequencyPlan,
    opts: &ChannelOptions,
    dt_us: f64,
) -> Result<Vec<Trajectory>, DynamicsError> {
    config.validate()?;
    drives.validate()?;
    (0..config.n_ions())
        .into_par_iter()
        .map(|site| {
            let ch = enumerate_raman_channels(config, profile, drives, plan, site, opts);
            evolve_channels(&ch, drives.duration_us, dt_us)
        })
        .collect()
}

/// Effective MS interaction between two targets whose drive light leaks onto
/// each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsModel {
    pub base_angle: f64,
    /// Residual field of target 2's beam at target 1, relative to target 1's own.
    pub epsilon_12: f64,
    pub epsilon_21: f64,
    pub psi_12: f64,
    pub psi_21: f64,
}

impl MsModel {
    pub fn ideal(base_angle: f64) -> Self {
        Self { base_angle, epsilon_12: 0.0, epsilon_21: 0.0, psi_12: 0.0, psi_21: 0.0 }
    }

    /// Model for targets `a` and `b` with crosstalk taken from the chain.
    pub fn for_pair(config: &ChainConfig, profile: &BeamProfile, a: usize, b: usize, base_angle: f64) -> Self {
        Self {
            base_angle,
            epsilon_12: epsilon(config, profile, b, a),
            epsilon_21: epsilon(config, profile, a, b),
            psi_12: config.optical_phase(b, a),
            psi_21: config.optical_phase(a, b),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.base_angle.is_finite() && self.base_angle >= 0.0) {
            return Err(DynamicsError::InvalidModel("base angle must be >= 0"));
        }
        let ok = |e: f64| (0.0..1.0).contains(&e);
        if !(ok(self.epsilon_12) && ok(self.epsilon_21)) {
            return Err(DynamicsError::InvalidModel("epsilons must lie in [0, 1)"));
        }
        Ok(())
    }

    /// `|1 + ε12 e^{i(Δφ+ψ12)}| |1 + ε21 e^{i(-Δφ+ψ21)}|`
    pub fn interference_factor(&self, delta_phi: f64) -> f64 {
        let one = C64::new(1.0, 0.0);
        (one + C64::from_polar(self.epsilon_12, delta_phi + self.psi_12)).norm()
            * (one + C64::from_polar(self.epsilon_21, -delta_phi + self.psi_21)).norm()
    }

    pub fn effective_angle(&self, delta_phi: f64) -> f64 {
        self.base_angle * self.interference_factor(delta_phi)
    }

    /// Angle factor for a counter-propagating single-qubit pulse on one
    /// target while the other is driven in phase (`qubit` 0 is target 1).
    pub(crate) fn counter_single_factor(&self, qubit: usize) -> f64 {
        let one = C64::new(1.0, 0.0);
        if qubit == 0 {
            (one + C64::from_polar(self.epsilon_12, self.psi_12)).norm()
        } else {
            (one + C64::from_polar(self.epsilon_21, self.psi_21)).norm()
        }
    }
}

/// `exp(-i θ_eff/2 σ_{φa} ⊗ σ_{φb})` with `φa = Δφ`, `φb = 0`.
pub fn ms_effective_propagator(model: &MsModel, delta_phi: f64) -> Matrix4c {
    ms_phased(model.effective_angle(delta_phi), delta_phi, 0.0)
}
