// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-beam single-photon detuning plans and Raman channel enumeration.
//!
//! Shifting both tones of beam `i` by the same offset keeps its own pair
//! resonant while pushing every cross-beam pair off two-photon resonance by
//! the difference of the two beams' offsets.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BeamProfile, BeamRef, ChainConfig, DriveSet, Tone, ToneClass};

pub const DEFAULT_OFFSET_RANGE_HZ: f64 = 0.5e6;
pub const DEFAULT_MIN_SEPARATION_HZ: f64 = 0.1e6;
pub const DEFAULT_NEIGHBOR_ORDER: usize = 2;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000;
pub const DEFAULT_CUTOFF_HZ: f64 = 50e3;
/// Rabi rate (cycles/s) of a full-amplitude intra-beam pair.
pub const DEFAULT_RABI_REF_HZ: f64 = 20e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no plan satisfied the separation constraints after {attempts} attempts")]
    Infeasible { attempts: u64 },
    #[error("invalid plan parameters: {0}")]
    InvalidParameters(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyPlan {
    pub offsets_hz: Vec<f64>,
    pub offset_range_hz: f64,
    pub min_separation_hz: f64,
    pub neighbor_order: usize,
    pub seed: u64,
    pub attempts_used: u64,
}

/// The document emitted by the `plan` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub offsets_hz: Vec<f64>,
    pub seed: u64,
    pub range_hz: f64,
    pub min_separation_hz: f64,
    pub attempts_used: u64,
}

impl FrequencyPlan {
    /// All beams at the same detuning: crosstalk mitigation off.
    pub fn uniform(n_beams: usize) -> Self {
        Self {
            offsets_hz: vec![0.0; n_beams],
            offset_range_hz: 0.0,
            min_separation_hz: 0.0,
            neighbor_order: 0,
            seed: 0,
            attempts_used: 0,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.offsets_hz.iter().all(|&o| o == 0.0)
    }

    pub fn n_beams(&self) -> usize {
        self.offsets_hz.len()
    }

    /// Offset of `beam`; beams outside the plan sit at zero.
    pub fn offset(&self, beam: usize) -> f64 {
        self.offsets_hz.get(beam).copied().unwrap_or(0.0)
    }

    /// Every constrained pair `1 <= |i-j| <= neighbor_order` is at least
    /// `min_separation_hz` apart and every offset is inside the range.
    pub fn satisfies_constraints(&self) -> bool {
        if self.is_uniform() && self.offset_range_hz == 0.0 {
            return true;
        }
        let n = self.offsets_hz.len();
        let in_range = self.offsets_hz.iter().all(|o| o.abs() <= self.offset_range_hz);
        in_range
            && (0..n).all(|i| {
                (i + 1..n.min(i + self.neighbor_order + 1))
                    .all(|j| (self.offsets_hz[i] - self.offsets_hz[j]).abs() >= self.min_separation_hz)
            })
    }

    pub fn document(&self) -> PlanDocument {
        PlanDocument {
            offsets_hz: self.offsets_hz.clone(),
            seed: self.seed,
            range_hz: self.offset_range_hz,
            min_separation_hz: self.min_separation_hz,
            attempts_used: self.attempts_used,
        }
    }
}

/// Draw offsets uniformly from `[-offset_range, offset_range]` until every
/// constrained pair is separated by `min_separation`. The whole vector is
/// redrawn on every rejection.
pub fn plan_detunings(
    n_beams: usize,
    offset_range_hz: f64,
    min_separation_hz: f64,
    neighbor_order: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<FrequencyPlan, PlanError> {
    if n_beams == 0 {
        return Err(PlanError::InvalidParameters("n_beams must be >= 1"));
    }
    if !(offset_range_hz.is_finite() && offset_range_hz > 0.0) {
        return Err(PlanError::InvalidParameters("offset range must be positive"));
    }
    if !(min_separation_hz.is_finite() && min_separation_hz > 0.0) {
        return Err(PlanError::InvalidParameters("min separation must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = FrequencyPlan {
        offsets_hz: vec![0.0; n_beams],
        offset_range_hz,
        min_separation_hz,
        neighbor_order,
        seed,
        attempts_used: 0,
    };
    for attempt in 1..=max_attempts {
        for o in plan.offsets_hz.iter_mut() {
            *o = rng.random_range(-offset_range_hz..=offset_range_hz);
        }
        plan.attempts_used = attempt;
        if plan.satisfies_constraints() {
            return Ok(plan);
        }
    }
    Err(PlanError::Infeasible { attempts: max_attempts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOptions {
    /// Pairs further than this from two-photon resonance are dropped.
    pub cutoff_hz: f64,
    pub rabi_ref_hz: f64,
    /// Keep every (Omega0, Omega1) pair regardless of detuning.
    pub keep_detuned: bool,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            rabi_ref_hz: DEFAULT_RABI_REF_HZ,
            keep_detuned: false,
        }
    }
}

/// One tone pair driving the qubit at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanChannel {
    pub site: usize,
    /// Complex Rabi rate in Hz (cycles/s); the argument is the drive phase.
    pub rabi_amplitude_hz: Complex64,
    pub two_photon_detuning_hz: f64,
    /// Indices into the drive set's tones: (Omega0-class, Omega1-class).
    pub source_tones: (usize, usize),
}

struct ToneAtSite {
    index: usize,
    field: f64,
    /// Offset from the nominal line (plan offset plus tone offset).
    offset_hz: f64,
    phase: f64,
    base_hz: f64,
}

fn tone_at_site(config: &ChainConfig, profile: &BeamProfile, plan: &FrequencyPlan, site: usize, index: usize, t: &Tone) -> ToneAtSite {
    let (field, plan_offset, optical) = match t.beam {
        BeamRef::Individual(b) => (
            config.beam_field(profile, b, site),
            plan.offset(b),
            config.optical_phase(b, site),
        ),
        BeamRef::Global => (config.global_beam_amplitude, 0.0, 0.0),
    };
    ToneAtSite {
        index,
        field: t.amplitude * field,
        offset_hz: plan_offset + t.detuning_offset_hz,
        phase: t.phase_rad + optical,
        base_hz: t.base_frequency_offset_hz,
    }
}

/// All Raman channels at `site` whose two-photon detuning lies within the
/// cutoff (or every pair, with `keep_detuned`).
pub fn enumerate_raman_channels(
    config: &ChainConfig,
    profile: &BeamProfile,
    drives: &DriveSet,
    plan: &FrequencyPlan,
    site: usize,
    opts: &ChannelOptions,
) -> Vec<RamanChannel> {
    let lower: Vec<ToneAtSite> = drives
        .tones
        .iter()
        .enumerate()
        .filter(|(_, t)| t.class == ToneClass::Omega0)
        .map(|(k, t)| tone_at_site(config, profile, plan, site, k, t))
        .filter(|t| t.field > 0.0)
        .collect();
    let upper: Vec<ToneAtSite> = drives
        .tones
        .iter()
        .enumerate()
        .filter(|(_, t)| t.class == ToneClass::Omega1)
        .map(|(k, t)| tone_at_site(config, profile, plan, site, k, t))
        .filter(|t| t.field > 0.0)
        .collect();

    let mut out = Vec::new();
    for a in &lower {
        for b in &upper {
            // Reference-line difference first so the GHz terms cancel exactly.
            let detuning = ((b.base_hz - config.qubit_frequency_hz) - a.base_hz) + (b.offset_hz - a.offset_hz);
            if !opts.keep_detuned && detuning.abs() > opts.cutoff_hz {
                continue;
            }
            let magnitude = opts.rabi_ref_hz * a.field * b.field;
            if magnitude == 0.0 {
                continue;
            }
            out.push(RamanChannel {
                site,
                rabi_amplitude_hz: Complex64::from_polar(magnitude, b.phase - a.phase),
                two_photon_detuning_hz: detuning,
                source_tones: (a.index, b.index),
            });
        }
    }
    out
}

/// Coherent sum of the exactly resonant channels, in Hz.
pub fn resonant_rate(channels: &[RamanChannel]) -> f64 {
    channels
        .iter()
        .filter(|c| c.two_photon_detuning_hz == 0.0)
        .map(|c| c.rabi_amplitude_hz)
        .sum::<Complex64>()
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{epsilon, DEFAULT_QUBIT_FREQUENCY_HZ as FQ};
    use proptest::prelude::*;

    fn brute_force_ok(p: &FrequencyPlan) -> bool {
        let n = p.offsets_hz.len();
        for i in 0..n {
            if p.offsets_hz[i].abs() > p.offset_range_hz {
                return false;
            }
            for j in 0..n {
                let d = i.abs_diff(j);
                if d >= 1 && d <= p.neighbor_order && (p.offsets_hz[i] - p.offsets_hz[j]).abs() < p.min_separation_hz {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn four_beam_plan_is_separated() {
        let p = plan_detunings(4, 5e5, 1e5, 2, 7, 10_000).unwrap();
        assert_eq!(p.offsets_hz.len(), 4);
        assert!(brute_force_ok(&p));
        assert!(!p.is_uniform());
    }

    #[test]
    fn single_beam_plan_is_trivial() {
        let p = plan_detunings(1, 5e5, 1e5, 2, 0, 10).unwrap();
        assert_eq!(p.offsets_hz.len(), 1);
        assert_eq!(p.attempts_used, 1);
    }

    #[test]
    fn tight_plan_is_infeasible() {
        assert_eq!(
            plan_detunings(4, 1e4, 1e5, 2, 0, 1000),
            Err(PlanError::Infeasible { attempts: 1000 })
        );
    }

    #[test]
    fn uniform_plan_is_flagged() {
        let p = FrequencyPlan::uniform(4);
        assert!(p.is_uniform());
        assert!(p.satisfies_constraints());
    }

    proptest! {
        #[test]
        fn plans_are_deterministic_and_sound(seed in any::<u64>(), n in 1usize..7, order in 1usize..4) {
            let a = plan_detunings(n, 5e5, 1e5, order, seed, 50_000);
            let b = plan_detunings(n, 5e5, 1e5, order, seed, 50_000);
            prop_assert_eq!(&a, &b);
            if let Ok(p) = a {
                prop_assert!(brute_force_ok(&p));
                let bits_a: Vec<u64> = p.offsets_hz.iter().map(|x| x.to_bits()).collect();
                let bits_b: Vec<u64> = b.unwrap().offsets_hz.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }

    fn own_tone_plus_neighbor_pair() -> DriveSet {
        DriveSet {
            tones: vec![
                Tone::omega0(BeamRef::Individual(0), FQ),
                Tone::omega0(BeamRef::Individual(1), FQ),
                Tone::omega1(BeamRef::Individual(1), FQ, 0.0),
            ],
            duration_us: 1.0,
        }
    }

    #[test]
    fn uniform_plan_gives_first_and_second_order_pairs() {
        let cfg = ChainConfig::default();
        let prof = BeamProfile::default();
        let opts = ChannelOptions::default();
        let ch = enumerate_raman_channels(&cfg, &prof, &own_tone_plus_neighbor_pair(), &FrequencyPlan::uniform(4), 0, &opts);
        assert_eq!(ch.len(), 2);
        let e = epsilon(&cfg, &prof, 1, 0);
        let mut mags: Vec<f64> = ch.iter().map(|c| c.rabi_amplitude_hz.norm() / opts.rabi_ref_hz).collect();
        mags.sort_by(f64::total_cmp);
        assert!((mags[0] - e * e).abs() < 1e-15);
        assert!((mags[1] - e).abs() < 1e-15);
        assert!(ch.iter().all(|c| c.two_photon_detuning_hz == 0.0));
    }

    #[test]
    fn distinct_plan_leaves_only_the_intensity_pair() {
        let cfg = ChainConfig::default();
        let prof = BeamProfile::default();
        let opts = ChannelOptions::default();
        let mut plan = FrequencyPlan::uniform(4);
        plan.offsets_hz = vec![0.0, 3e5, 0.0, 0.0];
        let ch = enumerate_raman_channels(&cfg, &prof, &own_tone_plus_neighbor_pair(), &plan, 0, &opts);
        assert_eq!(ch.len(), 1);
        let e = epsilon(&cfg, &prof, 1, 0);
        assert!((ch[0].rabi_amplitude_hz.norm() - opts.rabi_ref_hz * e * e).abs() < 1e-12);
        assert_eq!(ch[0].two_photon_detuning_hz, 0.0);
        assert_eq!(ch[0].source_tones, (1, 2));
    }

    #[test]
    fn no_tones_no_channels() {
        let d = DriveSet { tones: vec![], duration_us: 1.0 };
        let ch = enumerate_raman_channels(&ChainConfig::default(), &BeamProfile::default(), &d, &FrequencyPlan::uniform(4), 2, &ChannelOptions::default());
        assert!(ch.is_empty());
    }

    #[test]
    fn channel_count_law() {
        let prof = BeamProfile::default();
        let opts = ChannelOptions::default();
        for n in 1..=4 {
            let cfg = ChainConfig::evenly_spaced(n, 4.5);
            let drives = DriveSet::parallel_rotations(&vec![0.0; n], FQ, 1.0);
            // Constrain every pair so no cross-beam pair can fall inside the cutoff.
            let distinct = plan_detunings(n, 5e5, 1e5, n, 3, 100_000).unwrap();
            for site in 0..n {
                let u = enumerate_raman_channels(&cfg, &prof, &drives, &FrequencyPlan::uniform(n), site, &opts);
                assert_eq!(u.iter().filter(|c| c.two_photon_detuning_hz == 0.0).count(), n * n);
                let d = enumerate_raman_channels(&cfg, &prof, &drives, &distinct, site, &opts);
                assert_eq!(d.len(), n);
                assert!(d.iter().all(|c| c.two_photon_detuning_hz == 0.0));
            }
        }
    }

    #[test]
    fn distinct_plan_off_target_amplitude_is_epsilon_squared() {
        let cfg = ChainConfig::default();
        let prof = BeamProfile::default();
        let opts = ChannelOptions::default();
        let plan = plan_detunings(4, 5e5, 1e5, 3, 11, 100_000).unwrap();
        for i in 0..4 {
            let drives = DriveSet::target_with_spectators(4, i, FQ, 1.0);
            for j in (0..4).filter(|&j| j != i) {
                let ch = enumerate_raman_channels(&cfg, &prof, &drives, &plan, j, &opts);
                let largest = ch.iter().map(|c| c.rabi_amplitude_hz.norm()).fold(0.0, f64::max);
                let e = epsilon(&cfg, &prof, i, j);
                assert!((largest - e * e * opts.rabi_ref_hz).abs() <= 1e-12 * opts.rabi_ref_hz);
            }
        }
    }

    #[test]
    fn keep_detuned_retains_cross_pairs() {
        let cfg = ChainConfig::default();
        let prof = BeamProfile::default();
        let mut plan = FrequencyPlan::uniform(4);
        plan.offsets_hz = vec![0.0, 3e5, 0.0, 0.0];
        let opts = ChannelOptions { keep_detuned: true, ..Default::default() };
        let ch = enumerate_raman_channels(&cfg, &prof, &own_tone_plus_neighbor_pair(), &plan, 0, &opts);
        assert_eq!(ch.len(), 2);
        let detuned = ch.iter().find(|c| c.two_photon_detuning_hz != 0.0).unwrap();
        assert!((detuned.two_photon_detuning_hz - 3e5).abs() < 1e-6);
    }

    #[test]
    fn optical_phase_enters_cross_pairs_only() {
        let mut cfg = ChainConfig::default();
        let mut table = vec![vec![0.0; 4]; 4];
        table[1][0] = 0.4;
        cfg.optical_phases_rad = table;
        let prof = BeamProfile::default();
        let ch = enumerate_raman_channels(&cfg, &prof, &own_tone_plus_neighbor_pair(), &FrequencyPlan::uniform(4), 0, &ChannelOptions::default());
        for c in ch {
            let arg = c.rabi_amplitude_hz.arg();
            match c.source_tones {
                (0, 2) => assert!((arg - 0.4).abs() < 1e-12),
                (1, 2) => assert!(arg.abs() < 1e-12),
                other => panic!("unexpected pair {other:?}"),
            }
        }
    }
}
