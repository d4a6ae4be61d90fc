// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a single TOML document with nested sections. Every
//! field has a default, so an empty file is a valid configuration.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chain::{
    BeamProfile, ChainConfig, ChainError, DEFAULT_ABERRATION_WIDTH_UM, DEFAULT_LEFT_EPSILON, DEFAULT_QUBIT_FREQUENCY_HZ,
    DEFAULT_RIGHT_EPSILON, DEFAULT_SPACING_UM, DEFAULT_WAIST_UM,
};
use crate::freq_plan::{
    plan_detunings, ChannelOptions, FrequencyPlan, PlanError, DEFAULT_CUTOFF_HZ, DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MIN_SEPARATION_HZ, DEFAULT_NEIGHBOR_ORDER, DEFAULT_OFFSET_RANGE_HZ, DEFAULT_RABI_REF_HZ,
};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_SHOTS: u64 = 2000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Used when no output directory is given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub emit_svg: bool,
    pub chain: ChainSettings,
    pub profile: ProfileSettings,
    pub plan: PlanSettings,
    pub experiments: ExperimentSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSettings {
    pub n_ions: usize,
    pub spacing_um: f64,
    pub qubit_frequency_hz: f64,
    pub global_beam_amplitude: f64,
    /// Multiplier on every beam's field at sites other than its own.
    pub crosstalk_scale: f64,
}

/// The individual-addressing profile is calibrated so that a beam's field at
/// the left and right neighbor sites equals the two targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSettings {
    pub waist_um: f64,
    pub aberration_width_um: f64,
    pub left_epsilon: f64,
    pub right_epsilon: f64,
    /// `false` gives a plain Gaussian of `waist_um` and ignores the targets.
    pub aberration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSettings {
    /// Use a randomized detuning plan (`true`) or all-zero offsets.
    pub mitigated: bool,
    pub offset_range_hz: f64,
    pub min_separation_hz: f64,
    pub neighbor_order: usize,
    pub max_attempts: u64,
    pub cutoff_hz: f64,
    pub rabi_ref_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// Shots per measured point; 0 reports exact populations.
    pub shots: u64,
    pub confidence: f64,
    /// Time samples per Rabi trace.
    pub rabi_samples: usize,
    /// Integration steps allowed per Rabi trace.
    pub max_steps: u64,
    pub line_scan_points: usize,
    pub line_scan_span_um: f64,
    pub phase_points: usize,
    pub ms_phase_points: usize,
    pub ms_base_angle_rad: f64,
    /// Scale the CNOT's MS angle by the worst-case nearest-neighbor factor.
    pub cnot_inject_error: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: None,
            emit_svg: false,
            chain: ChainSettings::default(),
            profile: ProfileSettings::default(),
            plan: PlanSettings::default(),
            experiments: ExperimentSettings::default(),
        }
    }
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            n_ions: 4,
            spacing_um: DEFAULT_SPACING_UM,
            qubit_frequency_hz: DEFAULT_QUBIT_FREQUENCY_HZ,
            global_beam_amplitude: 1.0,
            crosstalk_scale: 1.0,
        }
    }
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            waist_um: DEFAULT_WAIST_UM,
            aberration_width_um: DEFAULT_ABERRATION_WIDTH_UM,
            left_epsilon: DEFAULT_LEFT_EPSILON,
            right_epsilon: DEFAULT_RIGHT_EPSILON,
            aberration: true,
        }
    }
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            mitigated: true,
            offset_range_hz: DEFAULT_OFFSET_RANGE_HZ,
            min_separation_hz: DEFAULT_MIN_SEPARATION_HZ,
            neighbor_order: DEFAULT_NEIGHBOR_ORDER,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            rabi_ref_hz: DEFAULT_RABI_REF_HZ,
        }
    }
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            confidence: 0.95,
            rabi_samples: 64,
            max_steps: 1_000_000,
            line_scan_points: 41,
            line_scan_span_um: 12.0,
            phase_points: 12,
            ms_phase_points: 24,
            ms_base_angle_rad: FRAC_PI_2,
            cnot_inject_error: true,
        }
    }
}

fn require(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg.to_string()))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.chain;
        require(c.n_ions >= 1, "chain.n_ions must be >= 1")?;
        require(positive(c.spacing_um), "chain.spacing_um must be > 0")?;
        require(positive(c.qubit_frequency_hz), "chain.qubit_frequency_hz must be > 0")?;
        require(c.global_beam_amplitude.is_finite() && c.global_beam_amplitude >= 0.0, "chain.global_beam_amplitude must be >= 0")?;
        require(c.crosstalk_scale.is_finite() && c.crosstalk_scale >= 0.0, "chain.crosstalk_scale must be >= 0")?;
        let p = &self.profile;
        require(positive(p.waist_um), "profile.waist_um must be > 0")?;
        require(positive(p.aberration_width_um), "profile.aberration_width_um must be > 0")?;
        if p.aberration {
            require(
                p.left_epsilon > p.right_epsilon && p.right_epsilon > 0.0 && p.left_epsilon < 1.0,
                "profile needs 1 > left_epsilon > right_epsilon > 0",
            )?;
        }
        let q = &self.plan;
        require(positive(q.offset_range_hz), "plan.offset_range_hz must be > 0")?;
        require(positive(q.min_separation_hz), "plan.min_separation_hz must be > 0")?;
        require(q.max_attempts >= 1, "plan.max_attempts must be >= 1")?;
        require(positive(q.cutoff_hz), "plan.cutoff_hz must be > 0")?;
        require(positive(q.rabi_ref_hz), "plan.rabi_ref_hz must be > 0")?;
        let e = &self.experiments;
        require(e.confidence > 0.0 && e.confidence < 1.0, "experiments.confidence must lie in (0, 1)")?;
        require(e.rabi_samples >= 8, "experiments.rabi_samples must be >= 8")?;
        require(e.max_steps >= 1000, "experiments.max_steps must be >= 1000")?;
        require(e.line_scan_points >= 2, "experiments.line_scan_points must be >= 2")?;
        require(positive(e.line_scan_span_um), "experiments.line_scan_span_um must be > 0")?;
        require(e.phase_points >= 8, "experiments.phase_points must be >= 8")?;
        require(e.ms_phase_points >= 8, "experiments.ms_phase_points must be >= 8")?;
        require(e.ms_base_angle_rad.is_finite() && e.ms_base_angle_rad > 0.0, "experiments.ms_base_angle_rad must be > 0")?;
        self.profile()?;
        Ok(())
    }

    pub fn chain(&self) -> ChainConfig {
        let c = &self.chain;
        let mut chain = ChainConfig::evenly_spaced(c.n_ions, c.spacing_um);
        chain.qubit_frequency_hz = c.qubit_frequency_hz;
        chain.global_beam_amplitude = c.global_beam_amplitude;
        chain.crosstalk_scale = c.crosstalk_scale;
        chain
    }

    pub fn profile(&self) -> Result<BeamProfile, ConfigError> {
        let p = &self.profile;
        if !p.aberration {
            return Ok(BeamProfile::gaussian(p.waist_um));
        }
        Ok(BeamProfile::calibrate(p.waist_um, p.aberration_width_um, self.chain.spacing_um, p.left_epsilon, p.right_epsilon)?)
    }

    pub fn channel_options(&self) -> ChannelOptions {
        ChannelOptions { cutoff_hz: self.plan.cutoff_hz, rabi_ref_hz: self.plan.rabi_ref_hz, keep_detuned: false }
    }

    /// The randomized plan for this seed, regardless of `plan.mitigated`.
    pub fn distinct_plan(&self) -> Result<FrequencyPlan, PlanError> {
        let q = &self.plan;
        plan_detunings(self.chain.n_ions, q.offset_range_hz, q.min_separation_hz, q.neighbor_order, self.seed, q.max_attempts)
    }

    /// The plan selected by `plan.mitigated`.
    pub fn active_plan(&self) -> Result<FrequencyPlan, PlanError> {
        if self.plan.mitigated {
            self.distinct_plan()
        } else {
            Ok(FrequencyPlan::uniform(self.chain.n_ions))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig { seed: 99, output_dir: Some("runs/a".into()), ..RunConfig::default() };
        cfg.experiments.shots = 0;
        cfg.chain.crosstalk_scale = 0.5;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 3"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml("[chain]\nions = 3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(RunConfig::from_toml("[chain]\nn_ions = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_toml("[profile]\nleft_epsilon = 0.01"), Err(ConfigError::Invalid(_))));
        assert!(RunConfig::from_toml("[profile]\naberration = false\nleft_epsilon = 0.01").is_ok());
    }

    #[test]
    fn default_profile_hits_targets() {
        let cfg = RunConfig::default();
        let chain = cfg.chain();
        let prof = cfg.profile().unwrap();
        assert!((chain.beam_field(&prof, 1, 0) - 0.05).abs() < 1e-9);
        assert!((chain.beam_field(&prof, 1, 2) - 0.02).abs() < 1e-9);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
