// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded, deterministic measurement pipelines.
//!
//! Every sampled point draws from its own generator seeded with
//! `seed + point_index` (wrapping), where the point index is a fixed
//! flattening of the scan grid. Shot count 0 skips sampling and reports
//! exact populations.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BeamProfile, BeamRef, ChainConfig, ChainError, DriveSet, Tone};
use crate::dynamics::{evolve_channels, evolve_channels_sampled, max_stable_dt_us, DynamicsError, MsModel};
use crate::freq_plan::{enumerate_raman_channels, resonant_rate, ChannelOptions, FrequencyPlan, PlanError, RamanChannel};
use crate::gates::{
    average_gate_fidelity, cnot, compile, pulses_unitary, truth_table, truth_table_fidelity, GateElement, GateError,
    GateSequence, PulseModel, Unitary, CNOT_OUTPUT,
};
use crate::stats::{
    angle_from_population, fit_phase_sinusoid, fit_rabi, phase_grid, sample_shots, wilson_interval, RabiFit, SinusoidFit,
    StatsError,
};

/// Periods of the expected rate covered by a target-ion Rabi trace.
pub const TARGET_PERIODS: f64 = 3.0;
/// Periods of the expected rate covered by a spectator-ion Rabi trace.
pub const SPECTATOR_PERIODS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("invalid experiment parameters: {0}")]
    Invalid(String),
}

/// Shot budget and seeding shared by every pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    /// 0 means exact populations.
    pub shots: u64,
    pub seed: u64,
    pub confidence: f64,
    /// Time samples per Rabi trace.
    pub rabi_samples: usize,
    /// Integration steps allowed per Rabi trace; longer windows are truncated.
    pub max_steps: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { shots: 2000, seed: 7, confidence: 0.95, rabi_samples: 64, max_steps: 1_000_000 }
    }
}

impl Sampling {
    pub fn exact(self) -> Self {
        Self { shots: 0, ..self }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.rabi_samples < 8 {
            return Err(ExperimentError::Invalid("rabi_samples must be >= 8".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ExperimentError::Invalid("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn point_seed(&self, index: u64) -> u64 {
        self.seed.wrapping_add(index)
    }

    /// Estimate of `p` with its interval; exact when `shots == 0`.
    fn measure(&self, p: f64, index: u64) -> Estimate {
        let p = p.clamp(0.0, 1.0);
        if self.shots == 0 {
            return Estimate { value: p, successes: None, lo: p, hi: p };
        }
        let k = sample_shots(p, self.shots, self.point_seed(index));
        let (lo, hi) = wilson_interval(k, self.shots, self.confidence).expect("k <= shots");
        Estimate { value: k as f64 / self.shots as f64, successes: Some(k), lo, hi }
    }
}

struct Estimate {
    value: f64,
    successes: Option<u64>,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

/// One row of an experiment's long-format table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Sub-scan label, e.g. `target=1` or `bare:0-2`.
    pub group: String,
    pub ion: Option<usize>,
    /// Scan-axis value.
    pub x: f64,
    /// Evolution time for Rabi traces.
    pub t_us: Option<f64>,
    /// Estimated population (or derived angle for `angle` groups).
    pub value: f64,
    pub successes: Option<u64>,
    pub shots: u64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub chain: ChainConfig,
    pub profile: BeamProfile,
    pub plan: Option<FrequencyPlan>,
    pub channel_options: Option<ChannelOptions>,
    pub sampling: Sampling,
    pub parameters: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Rabi-rate estimate from one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate_hz: f64,
    pub resolved: bool,
    /// Equal to `rate_hz` when resolved; otherwise the slowest rate that
    /// would have shown half a period within the trace.
    pub upper_bound_hz: f64,
    pub window_us: f64,
    /// The window was shortened to respect the step budget.
    pub truncated: bool,
    pub fit: Option<RabiFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsPairSummary {
    pub a: usize,
    pub b: usize,
    pub model: MsModel,
    pub bare_fit: SinusoidFit,
    pub zz_fit: SinusoidFit,
    /// Noise-free peak-to-peak of the bare effective angle.
    pub model_peak_to_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    LineScan {
        rabi_ref_hz: f64,
        rates: Vec<RateEstimate>,
        /// Rate over the reference rate at each position.
        relative_rates: Vec<f64>,
    },
    CrosstalkMatrix {
        /// `rates[i][j]`: ion `j` while driving target `i`.
        rates: Vec<Vec<RateEstimate>>,
        /// `rates[i][j] / rates[i][i]`.
        ratios: Vec<Vec<f64>>,
        /// Like `ratios` but using each entry's upper bound.
        ratio_upper_bounds: Vec<Vec<f64>>,
    },
    PhaseScan {
        scanned_ion: usize,
        pulse_duration_us: f64,
        fits: Vec<SinusoidFit>,
        fractional_amplitudes: Vec<f64>,
        /// Per ion: amplitude consistent with zero at 95%.
        consistent_with_zero: Vec<bool>,
    },
    MsScan {
        pairs: Vec<MsPairSummary>,
    },
    Cnot {
        ms_angle_scale: f64,
        /// `populations[input][output]`.
        populations: Vec<Vec<f64>>,
        lo: Vec<Vec<f64>>,
        hi: Vec<Vec<f64>>,
        truth_table_fidelity: f64,
        exact_truth_table_fidelity: f64,
        average_gate_fidelity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub scan_axis: ScanAxis,
    pub measurements: Vec<Measurement>,
    pub summary: Summary,
    pub metadata: Metadata,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Simulate and fit one Rabi trace of `periods` cycles at `expected_hz`.
/// `index` is the trace's first point index; it consumes `rabi_samples`.
fn rabi_trace(
    channels: &[RamanChannel],
    expected_hz: f64,
    periods: f64,
    sampling: &Sampling,
    index: u64,
    label: (&str, Option<usize>, f64),
) -> Result<(RateEstimate, Vec<Measurement>), ExperimentError> {
    let n = sampling.rabi_samples;
    let mut window_us = periods / expected_hz * 1e6;
    let dt = max_stable_dt_us(channels).min(window_us / n as f64);
    let mut truncated = false;
    if window_us / dt > sampling.max_steps as f64 {
        window_us = sampling.max_steps as f64 * dt;
        truncated = true;
    }
    let times: Vec<f64> = (1..=n).map(|k| window_us * k as f64 / n as f64).collect();
    let traj = evolve_channels_sampled(channels, &times, dt)?;
    let (group, ion, x) = label;
    let mut rows = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (k, (&t, &p)) in times.iter().zip(&traj.populations).enumerate() {
        let e = sampling.measure(p, index + k as u64);
        values.push(e.value);
        rows.push(Measurement {
            group: group.to_string(),
            ion,
            x,
            t_us: Some(t),
            value: e.value,
            successes: e.successes,
            shots: sampling.shots,
            lo: e.lo,
            hi: e.hi,
        });
    }
    let floor_hz = 0.5 / window_us * 1e6;
    let estimate = match fit_rabi(&times, &values) {
        Ok(fit) if fit.resolved => RateEstimate {
            rate_hz: fit.rate_hz,
            resolved: true,
            upper_bound_hz: fit.rate_hz,
            window_us,
            truncated,
            fit: Some(fit),
        },
        Ok(fit) => RateEstimate { rate_hz: 0.0, resolved: false, upper_bound_hz: floor_hz, window_us, truncated, fit: Some(fit) },
        Err(StatsError::LowResolution | StatsError::NoConvergence(_)) => {
            RateEstimate { rate_hz: 0.0, resolved: false, upper_bound_hz: floor_hz, window_us, truncated, fit: None }
        }
        Err(e) => return Err(e.into()),
    };
    Ok((estimate, rows))
}

/// Rate used to size a trace: the resonant sum, else the strongest channel,
/// else the reference rate.
fn sizing_rate(channels: &[RamanChannel], rabi_ref_hz: f64) -> f64 {
    let resonant = resonant_rate(channels);
    if resonant > 0.0 {
        return resonant;
    }
    let strongest = channels.iter().map(|c| c.rabi_amplitude_hz.norm()).fold(0.0, f64::max);
    if strongest > 0.0 {
        strongest
    } else {
        rabi_ref_hz
    }
}

fn base_metadata(
    chain: &ChainConfig,
    profile: &BeamProfile,
    plan: Option<&FrequencyPlan>,
    opts: Option<&ChannelOptions>,
    sampling: &Sampling,
) -> Metadata {
    Metadata {
        chain: chain.clone(),
        profile: *profile,
        plan: plan.cloned(),
        channel_options: opts.copied(),
        sampling: *sampling,
        parameters: BTreeMap::new(),
        notes: Vec::new(),
    }
}

/// Move a single ion across one IA beam centered at 0 and fit its Rabi rate
/// at each position. The drive pairs one IA tone with one global tone, so
/// the rate follows the IA field amplitude.
pub fn run_line_scan(
    config: &ChainConfig,
    profile: &BeamProfile,
    opts: &ChannelOptions,
    n_points: usize,
    span_um: f64,
    sampling: &Sampling,
) -> Result<ExperimentRecord, ExperimentError> {
    if n_points < 2 {
        return Err(ExperimentError::Invalid("line scan needs >= 2 points".into()));
    }
    if !(span_um.is_finite() && span_um > 0.0) {
        return Err(ExperimentError::Invalid("span must be > 0".into()));
    }
    sampling.validate()?;
    profile.validate()?;
    let positions = linspace(-0.5 * span_um, 0.5 * span_um, n_points);
    let fq = config.qubit_frequency_hz;
    let plan = FrequencyPlan::uniform(1);
    let samples = sampling.rabi_samples as u64;

    let results: Vec<(RateEstimate, Vec<Measurement>)> = positions
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut chain = ChainConfig::new(vec![x], vec![0.0])?;
            chain.qubit_frequency_hz = fq;
            chain.global_beam_amplitude = config.global_beam_amplitude;
            let drives = DriveSet::new(vec![Tone::omega0(BeamRef::Individual(0), fq), Tone::omega1(BeamRef::Global, fq, 0.0)], 1.0)?;
            let channels = enumerate_raman_channels(&chain, profile, &drives, &plan, 0, opts);
            let rate = sizing_rate(&channels, opts.rabi_ref_hz);
            rabi_trace(&channels, rate, TARGET_PERIODS, sampling, k as u64 * samples, ("rabi", Some(0), x))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut measurements = Vec::new();
    let mut rates = Vec::new();
    for (est, rows) in results {
        rates.push(est);
        measurements.extend(rows);
    }
    let relative_rates = rates.iter().map(|r| r.rate_hz / opts.rabi_ref_hz).collect();
    let mut metadata = base_metadata(config, profile, Some(&plan), Some(opts), sampling);
    metadata.parameters.insert("n_points".into(), n_points as f64);
    metadata.parameters.insert("span_um".into(), span_um);
    metadata.parameters.insert("periods".into(), TARGET_PERIODS);
    metadata.notes.push("beam centered at 0 um; ion scanned; rates from unweighted least-squares Rabi fits".into());
    Ok(ExperimentRecord {
        experiment_id: "linescan".into(),
        scan_axis: ScanAxis { name: "ion_position".into(), unit: "um".into(), values: positions },
        measurements,
        summary: Summary::LineScan { rabi_ref_hz: opts.rabi_ref_hz, rates, relative_rates },
        metadata,
    })
}

/// Drive each target with both tones on its own beam and a single
/// lower-class tone on every other beam, and fit the Rabi rate of every ion.
pub fn run_crosstalk_matrix(
    config: &ChainConfig,
    profile: &BeamProfile,
    plan: &FrequencyPlan,
    opts: &ChannelOptions,
    sampling: &Sampling,
) -> Result<ExperimentRecord, ExperimentError> {
    config.validate()?;
    profile.validate()?;
    sampling.validate()?;
    let n = config.n_ions();
    if plan.n_beams() != config.n_beams() {
        return Err(ExperimentError::Invalid(format!("plan has {} beams, chain has {}", plan.n_beams(), config.n_beams())));
    }
    let fq = config.qubit_frequency_hz;
    let samples = sampling.rabi_samples as u64;
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let results: Vec<(RateEstimate, Vec<Measurement>)> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let drives = DriveSet::target_with_spectators(config.n_beams(), i, fq, 1.0);
            let channels = enumerate_raman_channels(config, profile, &drives, plan, j, opts);
            let rate = sizing_rate(&channels, opts.rabi_ref_hz);
            let periods = if i == j { TARGET_PERIODS } else { SPECTATOR_PERIODS };
            let group = format!("target={i}");
            rabi_trace(&channels, rate, periods, sampling, k as u64 * samples, (&group, Some(j), i as f64))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut measurements = Vec::new();
    let mut rates: Vec<Vec<RateEstimate>> = vec![Vec::with_capacity(n); n];
    for ((i, _), (est, rows)) in cells.iter().zip(results) {
        rates[*i].push(est);
        measurements.extend(rows);
    }
    let ratios: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { rates[i][j].rate_hz / rates[i][i].rate_hz }).collect())
        .collect();
    let ratio_upper_bounds: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { rates[i][j].upper_bound_hz / rates[i][i].rate_hz }).collect())
        .collect();
    let mut metadata = base_metadata(config, profile, Some(plan), Some(opts), sampling);
    metadata.parameters.insert("target_periods".into(), TARGET_PERIODS);
    metadata.parameters.insert("spectator_periods".into(), SPECTATOR_PERIODS);
    metadata.notes.push("trace windows sized from the model's resonant rate at each ion".into());
    metadata.notes.push("unresolved entries report rate 0 and an upper bound of half a period per window".into());
    let suffix = if plan.is_uniform() { "uniform" } else { "distinct" };
    Ok(ExperimentRecord {
        experiment_id: format!("xtalk-matrix-{suffix}"),
        scan_axis: ScanAxis { name: "target".into(), unit: "index".into(), values: (0..n).map(|i| i as f64).collect() },
        measurements,
        summary: Summary::CrosstalkMatrix { rates, ratios, ratio_upper_bounds },
        metadata,
    })
}

/// Nominal π/2 on every ion in parallel with the Raman phase of
/// `scanned_ion` swept over `n_phases` points in [0, 2π); each ion's pulse
/// angle is fitted against the phase.
pub fn run_phase_scan(
    config: &ChainConfig,
    profile: &BeamProfile,
    plan: &FrequencyPlan,
    opts: &ChannelOptions,
    n_phases: usize,
    scanned_ion: usize,
    sampling: &Sampling,
) -> Result<ExperimentRecord, ExperimentError> {
    if n_phases < 8 {
        return Err(ExperimentError::Invalid("phase scan needs >= 8 phases".into()));
    }
    config.validate()?;
    profile.validate()?;
    sampling.validate()?;
    let n = config.n_ions();
    if scanned_ion >= n {
        return Err(ExperimentError::Invalid(format!("scanned ion {scanned_ion} outside chain of {n}")));
    }
    let fq = config.qubit_frequency_hz;
    let duration_us = 1e6 / (4.0 * opts.rabi_ref_hz);
    let phases = phase_grid(n_phases);
    let cells: Vec<(usize, usize)> = (0..n_phases).flat_map(|k| (0..n).map(move |j| (k, j))).collect();
    let populations: Vec<f64> = cells
        .par_iter()
        .map(|&(k, j)| {
            let mut beam_phases = vec![0.0; n];
            beam_phases[scanned_ion] = phases[k];
            let drives = DriveSet::parallel_rotations(&beam_phases, fq, duration_us);
            let channels = enumerate_raman_channels(config, profile, &drives, plan, j, opts);
            let dt = max_stable_dt_us(&channels).min(duration_us / 100.0);
            Ok(*evolve_channels(&channels, duration_us, dt)?.populations.last().expect("non-empty"))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut measurements = Vec::new();
    let mut angles = vec![Vec::with_capacity(n_phases); n];
    for (idx, (&(k, j), &p)) in cells.iter().zip(&populations).enumerate() {
        let e = sampling.measure(p, idx as u64);
        let theta = angle_from_population(e.value);
        angles[j].push(theta);
        measurements.push(Measurement {
            group: "population".into(),
            ion: Some(j),
            x: phases[k],
            t_us: Some(duration_us),
            value: e.value,
            successes: e.successes,
            shots: sampling.shots,
            lo: e.lo,
            hi: e.hi,
        });
        measurements.push(Measurement {
            group: "angle".into(),
            ion: Some(j),
            x: phases[k],
            t_us: Some(duration_us),
            value: theta,
            successes: e.successes,
            shots: sampling.shots,
            lo: angle_from_population(e.lo),
            hi: angle_from_population(e.hi),
        });
    }
    let fits: Vec<SinusoidFit> = angles.iter().map(|a| fit_phase_sinusoid(&phases, a)).collect::<Result<_, _>>()?;
    let fractional_amplitudes = fits.iter().map(|f| f.fractional_amplitude).collect();
    let consistent_with_zero = fits.iter().map(SinusoidFit::consistent_with_zero).collect();
    let mut metadata = base_metadata(config, profile, Some(plan), Some(opts), sampling);
    metadata.parameters.insert("n_phases".into(), n_phases as f64);
    metadata.parameters.insert("scanned_ion".into(), scanned_ion as f64);
    metadata.parameters.insert("pulse_duration_us".into(), duration_us);
    metadata.notes.push("sinusoid fits use unweighted least squares on angles 2 asin(sqrt(P))".into());
    let suffix = if plan.is_uniform() { "uniform" } else { "distinct" };
    Ok(ExperimentRecord {
        experiment_id: format!("phase-scan-{suffix}"),
        scan_axis: ScanAxis { name: "raman_phase".into(), unit: "rad".into(), values: phases },
        measurements,
        summary: Summary::PhaseScan { scanned_ion, pulse_duration_us: duration_us, fits, fractional_amplitudes, consistent_with_zero },
        metadata,
    })
}

/// Noise-free peak-to-peak of the bare MS angle over Δφ.
pub fn ms_model_peak_to_peak(model: &MsModel) -> f64 {
    let vals: Vec<f64> = (0..3600).map(|k| model.effective_angle(k as f64 * std::f64::consts::TAU / 3600.0)).collect();
    vals.iter().copied().fold(f64::MIN, f64::max) - vals.iter().copied().fold(f64::MAX, f64::min)
}

fn p11_from_ground(u: &Unitary) -> f64 {
    u.0[(3, 0)].norm_sqr()
}

/// Unitary of a bare MS at relative phase `delta_phi`.
fn bare_ms_unitary(model: &MsModel, delta_phi: f64) -> Result<Unitary, ExperimentError> {
    let mut seq = GateSequence::new(2);
    seq.push(GateElement::ms(0, 1, model.base_angle, delta_phi))?;
    let (pulses, _) = compile(&seq);
    Ok(pulses_unitary(&pulses, 2, &PulseModel { ms_crosstalk: Some(*model), ..PulseModel::default() }))
}

/// Unitary of a ZZ composite (inner MS at fixed phase) inside
/// `R_{φ+π/2}(±π/2)` wrappers on the first qubit and `R_{π/2}(±π/2)` on the
/// second, which map the ZZ back to an XX for readout.
fn wrapped_zz_unitary(model: &MsModel, phi: f64) -> Result<Unitary, ExperimentError> {
    let mut seq = GateSequence::new(2);
    seq.push(GateElement::r_phi(0, FRAC_PI_2, phi + FRAC_PI_2))?;
    seq.push(GateElement::r_phi(1, FRAC_PI_2, FRAC_PI_2))?;
    seq.push(GateElement::zz(0, 1, model.base_angle))?;
    seq.push(GateElement::r_phi(0, -FRAC_PI_2, phi + FRAC_PI_2))?;
    seq.push(GateElement::r_phi(1, -FRAC_PI_2, FRAC_PI_2))?;
    let (pulses, _) = compile(&seq);
    Ok(pulses_unitary(&pulses, 2, &PulseModel { ms_crosstalk: Some(*model), ..PulseModel::default() }))
}

/// For each pair, sweep the relative phase inside a bare MS and, separately,
/// the frame phase around a ZZ composite; read the rotation angle from the
/// |11> population.
pub fn run_ms_phase_scan(
    config: &ChainConfig,
    profile: &BeamProfile,
    pairs: &[(usize, usize)],
    base_angle: f64,
    n_phases: usize,
    sampling: &Sampling,
) -> Result<ExperimentRecord, ExperimentError> {
    if n_phases < 8 {
        return Err(ExperimentError::Invalid("MS scan needs >= 8 phases".into()));
    }
    config.validate()?;
    profile.validate()?;
    sampling.validate()?;
    let n = config.n_ions();
    if pairs.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
        return Err(ExperimentError::Invalid("pairs must name two distinct ions of the chain".into()));
    }
    let phases = phase_grid(n_phases);
    let mut measurements = Vec::new();
    let mut summaries = Vec::new();
    for (pi, &(a, b)) in pairs.iter().enumerate() {
        let model = MsModel::for_pair(config, profile, a, b, base_angle);
        model.validate()?;
        let mut fits = Vec::with_capacity(2);
        for (variant, name) in ["bare", "zz"].iter().enumerate() {
            let mut angles = Vec::with_capacity(n_phases);
            for (k, &phi) in phases.iter().enumerate() {
                let u = if variant == 0 { bare_ms_unitary(&model, phi)? } else { wrapped_zz_unitary(&model, phi)? };
                let index = ((pi * 2 + variant) * n_phases + k) as u64;
                let e = sampling.measure(p11_from_ground(&u), index);
                let theta = angle_from_population(e.value);
                angles.push(theta);
                measurements.push(Measurement {
                    group: format!("{name}:{a}-{b}"),
                    ion: None,
                    x: phi,
                    t_us: None,
                    value: theta,
                    successes: e.successes,
                    shots: sampling.shots,
                    lo: angle_from_population(e.lo),
                    hi: angle_from_population(e.hi),
                });
            }
            fits.push(fit_phase_sinusoid(&phases, &angles)?);
        }
        summaries.push(MsPairSummary { a, b, model, bare_fit: fits[0], zz_fit: fits[1], model_peak_to_peak: ms_model_peak_to_peak(&model) });
    }
    let mut metadata = base_metadata(config, profile, None, None, sampling);
    metadata.parameters.insert("base_angle_rad".into(), base_angle);
    metadata.parameters.insert("n_phases".into(), n_phases as f64);
    metadata.notes.push("angle = 2 asin(sqrt(P11)) from |00>; bare sweeps the MS relative phase, zz sweeps the first qubit's frame phase".into());
    Ok(ExperimentRecord {
        experiment_id: "ms-scan".into(),
        scan_axis: ScanAxis { name: "phase".into(), unit: "rad".into(), values: phases },
        measurements,
        summary: Summary::MsScan { pairs: summaries },
        metadata,
    })
}

/// Worst-case `θ_eff / θ` of a nearest-neighbor MS over the relative phase.
pub fn nearest_neighbor_ms_scale(config: &ChainConfig, profile: &BeamProfile) -> f64 {
    if config.n_ions() < 2 {
        return 1.0;
    }
    let model = MsModel::for_pair(config, profile, 0, 1, 1.0);
    (0..3600).map(|k| model.interference_factor(k as f64 * std::f64::consts::TAU / 3600.0)).fold(1.0, f64::max)
}

/// Multinomial draw over one truth-table row via chained binomials.
fn sample_row(probs: &[f64; 4], sampling: &Sampling, index: u64) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let mut remaining = sampling.shots;
    let mut mass = 1.0;
    for k in 0..3 {
        let q = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        counts[k] = sample_shots(q, remaining, sampling.point_seed(index + k as u64));
        remaining -= counts[k];
        mass -= probs[k];
    }
    counts[3] = remaining;
    counts
}

/// Compile the composite CNOT (control 0, target 1), optionally scaling its
/// MS angle by the nearest-neighbor worst-case factor, and measure every
/// basis input.
pub fn run_cnot_truth_table(
    config: &ChainConfig,
    profile: &BeamProfile,
    inject_error: bool,
    sampling: &Sampling,
) -> Result<ExperimentRecord, ExperimentError> {
    config.validate()?;
    profile.validate()?;
    sampling.validate()?;
    let scale = if inject_error { nearest_neighbor_ms_scale(config, profile) } else { 1.0 };
    let mut seq = GateSequence::new(2);
    seq.push(GateElement::cnot(0, 1))?;
    let (pulses, frames) = compile(&seq);
    let model = PulseModel { ms_angle_scale: Some(scale), ..PulseModel::default() };
    let u = Unitary(frames.correction() * pulses_unitary(&pulses, 2, &model).0);
    let exact = truth_table(&u);
    let mut populations = vec![vec![0.0; 4]; 4];
    let mut lo = vec![vec![0.0; 4]; 4];
    let mut hi = vec![vec![0.0; 4]; 4];
    let mut measurements = Vec::new();
    for input in 0..4 {
        let counts = if sampling.shots > 0 { Some(sample_row(&exact[input], sampling, input as u64 * 4)) } else { None };
        for output in 0..4 {
            let (value, successes, l, h) = match counts {
                Some(c) => {
                    let (l, h) = wilson_interval(c[output], sampling.shots, sampling.confidence)?;
                    (c[output] as f64 / sampling.shots as f64, Some(c[output]), l, h)
                }
                None => (exact[input][output], None, exact[input][output], exact[input][output]),
            };
            populations[input][output] = value;
            lo[input][output] = l;
            hi[input][output] = h;
            measurements.push(Measurement {
                group: format!("input={:02b}", input),
                ion: None,
                x: output as f64,
                t_us: None,
                value,
                successes,
                shots: sampling.shots,
                lo: l,
                hi: h,
            });
        }
    }
    let table: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| populations[r][c]));
    let truth_table_fidelity = truth_table_fidelity(&table)?;
    let exact_truth_table_fidelity = crate::gates::truth_table_fidelity(&exact)?;
    let average_gate_fidelity = average_gate_fidelity(&u, &Unitary::from(cnot()))?;
    let mut metadata = base_metadata(config, profile, None, None, sampling);
    metadata.parameters.insert("ms_angle_scale".into(), scale);
    metadata.parameters.insert("inject_error".into(), if inject_error { 1.0 } else { 0.0 });
    metadata.notes.push(format!("ideal outputs per input: {CNOT_OUTPUT:?}; basis order |q0 q1>, q0 most significant"));
    Ok(ExperimentRecord {
        experiment_id: "cnot".into(),
        scan_axis: ScanAxis { name: "input_state".into(), unit: "index".into(), values: (0..4).map(|k| k as f64).collect() },
        measurements,
        summary: Summary::Cnot {
            ms_angle_scale: scale,
            populations,
            lo,
            hi,
            truth_table_fidelity,
            exact_truth_table_fidelity,
            average_gate_fidelity,
        },
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ChainConfig, BeamProfile, ChannelOptions) {
        (ChainConfig::default(), BeamProfile::default(), ChannelOptions::default())
    }

    #[test]
    fn sampling_seeds_are_offsets() {
        let s = Sampling { seed: u64::MAX, ..Sampling::default() };
        assert_eq!(s.point_seed(1), 0);
    }

    #[test]
    fn exact_measurement_has_degenerate_interval() {
        let e = Sampling::default().exact().measure(0.3, 0);
        assert_eq!((e.value, e.lo, e.hi, e.successes), (0.3, 0.3, 0.3, None));
    }

    #[test]
    fn row_sampling_conserves_shots() {
        let s = Sampling::default();
        let c = sample_row(&[0.1, 0.2, 0.3, 0.4], &s, 0);
        assert_eq!(c.iter().sum::<u64>(), s.shots);
        let c = sample_row(&[0.0, 1.0, 0.0, 0.0], &s, 5);
        assert_eq!(c, [0, s.shots, 0, 0]);
    }

    #[test]
    fn line_scan_center_rate_is_reference() {
        let (cfg, prof, opts) = setup();
        let rec = run_line_scan(&cfg, &prof, &opts, 3, 9.0, &Sampling::default().exact()).unwrap();
        let Summary::LineScan { relative_rates, .. } = &rec.summary else { panic!() };
        assert!((relative_rates[1] - 1.0).abs() < 1e-3, "{relative_rates:?}");
        assert!((relative_rates[0] - 0.05).abs() < 1e-3);
        assert!((relative_rates[2] - 0.02).abs() < 1e-3);
    }

    #[test]
    fn cnot_exact_is_perfect() {
        let (cfg, prof, _) = setup();
        let rec = run_cnot_truth_table(&cfg, &prof, false, &Sampling::default().exact()).unwrap();
        let Summary::Cnot { truth_table_fidelity, average_gate_fidelity, .. } = rec.summary else { panic!() };
        assert!((truth_table_fidelity - 1.0).abs() < 1e-9);
        assert!((average_gate_fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wrapped_zz_is_phase_independent_and_bare_is_not() {
        let (cfg, prof, _) = setup();
        let model = MsModel::for_pair(&cfg, &prof, 0, 1, FRAC_PI_2);
        let zz: Vec<f64> = phase_grid(8).iter().map(|&p| p11_from_ground(&wrapped_zz_unitary(&model, p).unwrap())).collect();
        assert!(zz.iter().all(|p| (p - zz[0]).abs() < 1e-12));
        let bare: Vec<f64> = phase_grid(8).iter().map(|&p| p11_from_ground(&bare_ms_unitary(&model, p).unwrap())).collect();
        assert!(bare.iter().any(|p| (p - bare[0]).abs() > 1e-3));
    }

    #[test]
    fn ideal_wrapped_zz_reads_back_the_angle() {
        let model = MsModel::ideal(1.1);
        let p = p11_from_ground(&wrapped_zz_unitary(&model, 0.7).unwrap());
        assert!((angle_from_population(p) - 1.1).abs() < 1e-12);
    }
}
