// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Ion chain geometry, individual-addressing beam profiles and applied tones.
//!
//! Positions are in µm, frequencies in Hz (cycles, not angular) and phases in
//! rad. Field amplitudes are dimensionless and normalized so that a beam has
//! unit field at its own center.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Spacing between adjacent ions in the default chain.
pub const DEFAULT_SPACING_UM: f64 = 4.5;
/// Nominal hyperfine qubit splitting. Only ever used as a reference for
/// frequency differences.
pub const DEFAULT_QUBIT_FREQUENCY_HZ: f64 = 12.642_8e9;
pub const DEFAULT_WAIST_UM: f64 = 1.6;
pub const DEFAULT_ABERRATION_WIDTH_UM: f64 = 4.0;
/// Residual field fraction at the left nearest neighbor of a beam.
pub const DEFAULT_LEFT_EPSILON: f64 = 0.05;
/// Residual field fraction at the right nearest neighbor of a beam.
pub const DEFAULT_RIGHT_EPSILON: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("ion positions must be finite and strictly increasing")]
    PositionsNotIncreasing,
    #[error("chain must contain at least one ion")]
    EmptyChain,
    #[error("expected {expected} beam centers, got {got}")]
    BeamCount { expected: usize, got: usize },
    #[error("invalid beam profile: {0}")]
    InvalidProfile(&'static str),
    #[error("qubit frequency must be positive and finite")]
    QubitFrequency,
    #[error("crosstalk scale must be finite and non-negative")]
    CrosstalkScale,
    #[error("optical phase table must be {n}x{n}")]
    OpticalPhaseShape { n: usize },
    #[error("profile calibration failed: {0}")]
    Calibration(&'static str),
    #[error("drive set invalid: {0}")]
    InvalidDrive(String),
}

/// Static description of the ion chain and its addressing optics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub ion_positions_um: Vec<f64>,
    pub qubit_frequency_hz: f64,
    /// One center per individual-addressing beam.
    pub beam_centers_um: Vec<f64>,
    pub global_beam_amplitude: f64,
    /// Global multiplier applied to residual illumination of every beam at
    /// sites other than its own. 1.0 is the physical profile.
    #[serde(default = "one")]
    pub crosstalk_scale: f64,
    /// Optical phase picked up by beam `b` at site `j`, indexed `[b][j]`.
    /// Empty means all zeros.
    #[serde(default)]
    pub optical_phases_rad: Vec<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self::evenly_spaced(4, DEFAULT_SPACING_UM)
    }
}

impl ChainConfig {
    /// `n` ions at `spacing` µm, one beam centered on every ion.
    pub fn evenly_spaced(n: usize, spacing_um: f64) -> Self {
        let positions: Vec<f64> = (0..n).map(|k| k as f64 * spacing_um).collect();
        Self {
            beam_centers_um: positions.clone(),
            ion_positions_um: positions,
            qubit_frequency_hz: DEFAULT_QUBIT_FREQUENCY_HZ,
            global_beam_amplitude: 1.0,
            crosstalk_scale: 1.0,
            optical_phases_rad: Vec::new(),
        }
    }

    pub fn new(ion_positions_um: Vec<f64>, beam_centers_um: Vec<f64>) -> Result<Self, ChainError> {
        let cfg = Self {
            ion_positions_um,
            beam_centers_um,
            ..Self::evenly_spaced(0, DEFAULT_SPACING_UM)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_crosstalk_scale(mut self, scale: f64) -> Self {
        self.crosstalk_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.ion_positions_um.is_empty() {
            return Err(ChainError::EmptyChain);
        }
        let increasing = self.ion_positions_um.iter().all(|x| x.is_finite())
            && self.ion_positions_um.windows(2).all(|w| w[1] > w[0]);
        if !increasing {
            return Err(ChainError::PositionsNotIncreasing);
        }
        if self.beam_centers_um.len() != self.ion_positions_um.len() {
            return Err(ChainError::BeamCount {
                expected: self.ion_positions_um.len(),
                got: self.beam_centers_um.len(),
            });
        }
        if !(self.qubit_frequency_hz.is_finite() && self.qubit_frequency_hz > 0.0) {
            return Err(ChainError::QubitFrequency);
        }
        if !(self.crosstalk_scale.is_finite() && self.crosstalk_scale >= 0.0) {
            return Err(ChainError::CrosstalkScale);
        }
        if !(self.global_beam_amplitude.is_finite() && self.global_beam_amplitude >= 0.0) {
            return Err(ChainError::InvalidDrive("global beam amplitude must be >= 0".into()));
        }
        let n = self.n_beams();
        if !self.optical_phases_rad.is_empty()
            && (self.optical_phases_rad.len() != n
                || self.optical_phases_rad.iter().any(|row| row.len() != n))
        {
            return Err(ChainError::OpticalPhaseShape { n });
        }
        Ok(())
    }

    pub fn n_ions(&self) -> usize {
        self.ion_positions_um.len()
    }

    pub fn n_beams(&self) -> usize {
        self.beam_centers_um.len()
    }

    pub fn optical_phase(&self, beam: usize, site: usize) -> f64 {
        self.optical_phases_rad
            .get(beam)
            .and_then(|row| row.get(site))
            .copied()
            .unwrap_or(0.0)
    }

    /// Field amplitude of IA beam `beam` at ion `site`, normalized to the
    /// beam's center. Residual light (beam != site) is scaled by
    /// `crosstalk_scale`.
    pub fn beam_field(&self, profile: &BeamProfile, beam: usize, site: usize) -> f64 {
        let f = profile.field_at(self.beam_centers_um[beam], self.ion_positions_um[site]);
        if beam == site {
            f
        } else {
            self.crosstalk_scale * f
        }
    }
}

/// Gaussian main lobe plus one displaced Gaussian sidelobe.
///
/// The raw field is `exp(-(d/w)^2) + a * exp(-((d - o)/s)^2)` with
/// `d = x - center`, divided by its value at `d = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamProfile {
    pub waist_um: f64,
    pub aberration_amplitude: f64,
    pub aberration_offset_um: f64,
    pub aberration_width_um: f64,
}

impl Default for BeamProfile {
    fn default() -> Self {
        Self::calibrate(
            DEFAULT_WAIST_UM,
            DEFAULT_ABERRATION_WIDTH_UM,
            DEFAULT_SPACING_UM,
            DEFAULT_LEFT_EPSILON,
            DEFAULT_RIGHT_EPSILON,
        )
        .expect("default profile targets are reachable")
    }
}

impl BeamProfile {
    /// Symmetric Gaussian with no aberration.
    pub fn gaussian(waist_um: f64) -> Self {
        Self {
            waist_um,
            aberration_amplitude: 0.0,
            aberration_offset_um: 0.0,
            aberration_width_um: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if !(self.waist_um.is_finite() && self.waist_um > 0.0) {
            return Err(ChainError::InvalidProfile("waist must be positive"));
        }
        if !(self.aberration_amplitude.is_finite() && self.aberration_amplitude >= 0.0) {
            return Err(ChainError::InvalidProfile("aberration amplitude must be >= 0"));
        }
        if !(self.aberration_width_um.is_finite() && self.aberration_width_um > 0.0) {
            return Err(ChainError::InvalidProfile("aberration width must be positive"));
        }
        if !self.aberration_offset_um.is_finite() {
            return Err(ChainError::InvalidProfile("aberration offset must be finite"));
        }
        Ok(())
    }

    fn main_lobe(&self, d: f64) -> f64 {
        let u = d / self.waist_um;
        (-u * u).exp()
    }

    fn side_lobe(&self, d: f64) -> f64 {
        let u = (d - self.aberration_offset_um) / self.aberration_width_um;
        (-u * u).exp()
    }

    fn raw(&self, d: f64) -> f64 {
        self.main_lobe(d) + self.aberration_amplitude * self.side_lobe(d)
    }

    /// Normalized field amplitude at `x` for a beam centered at `center`.
    pub fn field_at(&self, center: f64, x: f64) -> f64 {
        self.raw(x - center) / self.raw(0.0)
    }

    /// Upper bound on `|d field / dx|`. The derivative of `exp(-(d/w)^2)`
    /// peaks at `sqrt(2/e)/w`.
    pub fn lipschitz_bound(&self) -> f64 {
        let c = (2.0 / std::f64::consts::E).sqrt();
        (c / self.waist_um + self.aberration_amplitude * c / self.aberration_width_um)
            / self.raw(0.0)
    }

    /// Fit the sidelobe so the normalized field equals `left` at
    /// `-spacing` and `right` at `+spacing`.
    ///
    /// For a fixed sidelobe offset the left condition is linear in the
    /// sidelobe amplitude, so only the offset is root-found (bisection over
    /// `[-spacing, 0]`).
    pub fn calibrate(
        waist_um: f64,
        width_um: f64,
        spacing_um: f64,
        left: f64,
        right: f64,
    ) -> Result<Self, ChainError> {
        if !(left > right && right > 0.0 && left < 1.0) {
            return Err(ChainError::Calibration("need 1 > left > right > 0"));
        }
        let with_offset = |offset: f64| -> Option<Self> {
            let mut p = Self {
                waist_um,
                aberration_amplitude: 0.0,
                aberration_offset_um: offset,
                aberration_width_um: width_um,
            };
            let g0 = p.main_lobe(0.0);
            let gx = p.main_lobe(-spacing_um);
            let h0 = p.side_lobe(0.0);
            let hx = p.side_lobe(-spacing_um);
            let denom = hx - left * h0;
            if denom <= 0.0 {
                return None;
            }
            let amp = (left * g0 - gx) / denom;
            if !(amp.is_finite() && amp >= 0.0) {
                return None;
            }
            p.aberration_amplitude = amp;
            Some(p)
        };
        let residual = |offset: f64| with_offset(offset).map(|p| p.field_at(0.0, spacing_um) - right);

        // residual > 0 for a centered (symmetric) sidelobe; walk the lower
        // bracket in until the sidelobe solution exists.
        let mut hi = 0.0;
        let r_hi = residual(hi).ok_or(ChainError::Calibration("no symmetric solution"))?;
        if r_hi <= 0.0 {
            return Err(ChainError::Calibration("right target above symmetric value"));
        }
        let mut lo = -spacing_um;
        let mut r_lo = residual(lo);
        let mut guard = 0;
        while !matches!(r_lo, Some(r) if r < 0.0) {
            lo *= 0.5;
            r_lo = residual(lo);
            guard += 1;
            if guard > 60 || lo.abs() < 1e-9 {
                return Err(ChainError::Calibration("could not bracket sidelobe offset"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match residual(mid) {
                Some(r) if r > 0.0 => hi = mid,
                Some(_) => lo = mid,
                None => return Err(ChainError::Calibration("lost bracket")),
            }
            if (hi - lo).abs() < 1e-15 {
                break;
            }
        }
        with_offset(0.5 * (lo + hi)).ok_or(ChainError::Calibration("no solution at root"))
    }
}

/// Normalized field of `profile` centered at `center`, evaluated at `x`.
pub fn field_at(profile: &BeamProfile, center: f64, x: f64) -> f64 {
    profile.field_at(center, x)
}

/// Field fraction of beam `beam` at site `site` relative to its own site.
pub fn epsilon(config: &ChainConfig, profile: &BeamProfile, beam: usize, site: usize) -> f64 {
    if beam == site {
        return 1.0;
    }
    config.beam_field(profile, beam, site) / config.beam_field(profile, beam, beam)
}

/// Which light source a tone is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeamRef {
    Individual(usize),
    Global,
}

/// Nominal role of a tone in a Raman pair. A resonant pair is an
/// `Omega0` tone followed by an `Omega1` tone one qubit splitting higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToneClass {
    Omega0,
    Omega1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub beam: BeamRef,
    pub class: ToneClass,
    /// Offset from the `Omega0` comb line: 0 for `Omega0`, the qubit
    /// splitting for `Omega1`.
    pub base_frequency_offset_hz: f64,
    /// Extra per-tone offset on top of the beam's frequency-plan offset.
    pub detuning_offset_hz: f64,
    pub phase_rad: f64,
    pub amplitude: f64,
}

impl Tone {
    pub fn new(beam: BeamRef, class: ToneClass, qubit_frequency_hz: f64, phase_rad: f64, amplitude: f64) -> Self {
        let base = match class {
            ToneClass::Omega0 => 0.0,
            ToneClass::Omega1 => qubit_frequency_hz,
        };
        Self {
            beam,
            class,
            base_frequency_offset_hz: base,
            detuning_offset_hz: 0.0,
            phase_rad: phase_rad.rem_euclid(TAU),
            amplitude,
        }
    }

    pub fn omega0(beam: BeamRef, qubit_frequency_hz: f64) -> Self {
        Self::new(beam, ToneClass::Omega0, qubit_frequency_hz, 0.0, 1.0)
    }

    pub fn omega1(beam: BeamRef, qubit_frequency_hz: f64, phase_rad: f64) -> Self {
        Self::new(beam, ToneClass::Omega1, qubit_frequency_hz, phase_rad, 1.0)
    }
}

/// Tones applied simultaneously for one pulse segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSet {
    pub tones: Vec<Tone>,
    pub duration_us: f64,
}

impl DriveSet {
    pub fn new(tones: Vec<Tone>, duration_us: f64) -> Result<Self, ChainError> {
        let d = Self { tones, duration_us };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if !(self.duration_us.is_finite() && self.duration_us > 0.0) {
            return Err(ChainError::InvalidDrive("duration must be positive".into()));
        }
        for t in &self.tones {
            if !(t.amplitude.is_finite() && t.amplitude >= 0.0) {
                return Err(ChainError::InvalidDrive("tone amplitude must be >= 0".into()));
            }
            if !(0.0..TAU).contains(&t.phase_rad) {
                return Err(ChainError::InvalidDrive("tone phase must lie in [0, 2pi)".into()));
            }
        }
        let mut beams: Vec<BeamRef> = self.tones.iter().map(|t| t.beam).collect();
        beams.sort_by_key(|b| match b {
            BeamRef::Individual(i) => *i,
            BeamRef::Global => usize::MAX,
        });
        for w in beams.windows(3) {
            if w[0] == w[1] && w[1] == w[2] {
                return Err(ChainError::InvalidDrive(format!("more than 2 tones on beam {:?}", w[0])));
            }
        }
        Ok(())
    }

    /// Both tones on `target`'s beam, a single `Omega0` tone on every other
    /// beam in `0..n_beams`.
    pub fn target_with_spectators(n_beams: usize, target: usize, qubit_frequency_hz: f64, duration_us: f64) -> Self {
        let mut tones = Vec::with_capacity(n_beams + 1);
        for b in 0..n_beams {
            tones.push(Tone::omega0(BeamRef::Individual(b), qubit_frequency_hz));
            if b == target {
                tones.push(Tone::omega1(BeamRef::Individual(b), qubit_frequency_hz, 0.0));
            }
        }
        Self { tones, duration_us }
    }

    /// Both tones on every beam; `phases[b]` is beam `b`'s Raman phase.
    pub fn parallel_rotations(phases: &[f64], qubit_frequency_hz: f64, duration_us: f64) -> Self {
        let tones = phases
            .iter()
            .enumerate()
            .flat_map(|(b, &phi)| {
                [
                    Tone::omega0(BeamRef::Individual(b), qubit_frequency_hz),
                    Tone::omega1(BeamRef::Individual(b), qubit_frequency_hz, phi),
                ]
            })
            .collect();
        Self { tones, duration_us }
    }
}
