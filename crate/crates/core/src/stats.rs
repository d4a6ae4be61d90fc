// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Binomial statistics and the two fit shapes used by the experiments.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fits whose amplitude falls below this are reported as unresolved, rate 0.
pub const AMPLITUDE_FLOOR: f64 = 0.05;
pub const MAX_RABI_ITERATIONS: usize = 200;
pub const RABI_PARAMETER_TOL: f64 = 1e-10;
/// sqrt(-2 ln 0.05): 95% quantile of a Rayleigh variable with unit scale.
const RAYLEIGH_95: f64 = 2.447_746_830_680_816;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid counts: {successes} successes out of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("confidence must lie in (0, 1)")]
    InvalidConfidence,
    #[error("too few samples or too short a span to resolve the oscillation")]
    LowResolution,
    #[error("fit did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("phase points must number >= 6 and span >= 5/6 of a turn")]
    InsufficientSpan,
}

// Rational approximation to the inverse normal CDF (P. J. Acklam), relative
// error below 1.15e-9 over the full range.
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const Q_LOW: f64 = 0.024_25;

/// Inverse of the standard normal CDF for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let tail = |q: f64| {
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    };
    if p < Q_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - Q_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Two-sided Wilson score interval for `successes / trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::InvalidCounts { successes, trials });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence);
    }
    let z = normal_quantile(0.5 + 0.5 * confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2n = z * z / n;
    let center = (p + 0.5 * z2n) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// Seeded binomial draw: number of |1> outcomes in `n_shots` at probability `p`.
pub fn sample_shots(p: f64, n_shots: u64, seed: u64) -> u64 {
    if n_shots == 0 {
        return 0;
    }
    let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Binomial::new(n_shots, p).expect("p clamped into [0, 1]").sample(&mut rng)
}

/// Rotation angle of a pulse (nominally <= π) from its |1> population.
pub fn angle_from_population(p1: f64) -> f64 {
    2.0 * p1.clamp(0.0, 1.0).sqrt().asin()
}

/// `P(t) = (amplitude/2)(1 - cos(2π rate t))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub rate_hz: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
    /// False when the amplitude is below [`AMPLITUDE_FLOOR`]; `rate_hz` is then 0.
    pub resolved: bool,
    pub iterations: usize,
}

fn rabi_model(a: f64, f_mhz: f64, t: f64) -> f64 {
    0.5 * a * (1.0 - (TAU * f_mhz * t).cos())
}

fn rms_residual(times: &[f64], pops: &[f64], a: f64, f: f64) -> f64 {
    let ss: f64 = times.iter().zip(pops).map(|(&t, &p)| (p - rabi_model(a, f, t)).powi(2)).sum();
    (ss / times.len() as f64).sqrt()
}

/// Frequency (cycles/µs) of the largest periodogram peak of the
/// mean-subtracted signal, on a grid 8x finer than 1/span.
fn dominant_frequency(times: &[f64], pops: &[f64], span: f64) -> f64 {
    let mean = pops.iter().sum::<f64>() / pops.len() as f64;
    let df = 1.0 / (8.0 * span);
    let f_max = (pops.len() - 1) as f64 / (2.0 * span);
    let n_grid = (f_max / df).floor() as usize;
    let mut best = (0.0, f64::MIN);
    for k in 1..=n_grid {
        let f = k as f64 * df;
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &p) in times.iter().zip(pops) {
            let (s, c) = (TAU * f * t).sin_cos();
            re += (p - mean) * c;
            im -= (p - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (f, power);
        }
    }
    best.0
}

/// Least-squares Rabi fit: periodogram seed, then damped Gauss-Newton.
pub fn fit_rabi(times_us: &[f64], populations: &[f64]) -> Result<RabiFit, StatsError> {
    if times_us.len() != populations.len() || times_us.len() < 8 {
        return Err(StatsError::LowResolution);
    }
    let t_min = times_us.iter().copied().fold(f64::MAX, f64::min);
    let t_max = times_us.iter().copied().fold(f64::MIN, f64::max);
    let span = t_max - t_min;
    if span.is_nan() || span <= 0.0 {
        return Err(StatsError::LowResolution);
    }
    let p_min = populations.iter().copied().fold(f64::MAX, f64::min);
    let p_max = populations.iter().copied().fold(f64::MIN, f64::max);
    if p_max - p_min < AMPLITUDE_FLOOR {
        let mean = populations.iter().sum::<f64>() / populations.len() as f64;
        let rms = (populations.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / populations.len() as f64).sqrt();
        return Ok(RabiFit { rate_hz: 0.0, amplitude: p_max - p_min, residual_rms: rms, resolved: false, iterations: 0 });
    }
    let f0 = dominant_frequency(times_us, populations, span);
    if f0 * span < 0.5 {
        return Err(StatsError::LowResolution);
    }

    let mut params = Vector2::new((p_max - p_min).clamp(AMPLITUDE_FLOOR, 1.05), f0);
    let cost = |p: &Vector2<f64>| -> f64 {
        times_us.iter().zip(populations).map(|(&t, &y)| (y - rabi_model(p[0], p[1], t)).powi(2)).sum()
    };
    let mut current = cost(&params);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_RABI_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for (&t, &y) in times_us.iter().zip(populations) {
            let (s, c) = (TAU * params[1] * t).sin_cos();
            let j = Vector2::new(0.5 * (1.0 - c), 0.5 * params[0] * s * TAU * t);
            let r = y - 0.5 * params[0] * (1.0 - c);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut damped = jtj;
        for k in 0..2 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = params + step;
        let small = (0..2).all(|k| step[k].abs() <= RABI_PARAMETER_TOL * (params[k].abs() + RABI_PARAMETER_TOL));
        let trial_cost = cost(&trial);
        if trial_cost <= current {
            params = trial;
            current = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
        } else {
            lambda *= 4.0;
        }
        if small || lambda > 1e12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(StatsError::NoConvergence(MAX_RABI_ITERATIONS));
    }
    let amplitude = params[0].clamp(0.0, 1.05);
    let rate_mhz = params[1].abs();
    if rate_mhz * span < 0.5 {
        return Err(StatsError::LowResolution);
    }
    let residual_rms = rms_residual(times_us, populations, amplitude, rate_mhz);
    let resolved = amplitude >= AMPLITUDE_FLOOR;
    Ok(RabiFit {
        rate_hz: if resolved { rate_mhz * 1e6 } else { 0.0 },
        amplitude,
        residual_rms,
        resolved,
        iterations,
    })
}

/// `θ(φ) = θ̄ + (A/2) sin(φ + ξ)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Peak-to-peak amplitude `A`.
    pub amplitude: f64,
    pub xi: f64,
    pub theta_bar: f64,
    /// `A / θ̄`
    pub fractional_amplitude: f64,
    pub residual_rms: f64,
    /// Standard error of the sin / cos coefficients (mean of the two).
    pub coefficient_stderr: f64,
}

impl SinusoidFit {
    /// Whether `A` is consistent with zero at 95%: the half-amplitude is
    /// within the Rayleigh 95% quantile of the coefficient noise.
    pub fn consistent_with_zero(&self) -> bool {
        0.5 * self.amplitude <= RAYLEIGH_95 * self.coefficient_stderr
    }
}

/// Exact linear least squares in the basis {1, sin φ, cos φ}.
pub fn fit_phase_sinusoid(phis: &[f64], thetas: &[f64]) -> Result<SinusoidFit, StatsError> {
    if phis.len() != thetas.len() || phis.len() < 6 {
        return Err(StatsError::InsufficientSpan);
    }
    let lo = phis.iter().copied().fold(f64::MAX, f64::min);
    let hi = phis.iter().copied().fold(f64::MIN, f64::max);
    if hi - lo < TAU * 5.0 / 6.0 - 1e-12 {
        return Err(StatsError::InsufficientSpan);
    }
    let mut mtm = Matrix3::<f64>::zeros();
    let mut mty = Vector3::<f64>::zeros();
    for (&phi, &y) in phis.iter().zip(thetas) {
        let row = Vector3::new(1.0, phi.sin(), phi.cos());
        mtm += row * row.transpose();
        mty += row * y;
    }
    let inv = mtm.try_inverse().ok_or(StatsError::InsufficientSpan)?;
    let coef = inv * mty;
    let (offset, b, c) = (coef[0], coef[1], coef[2]);
    let rss: f64 = phis
        .iter()
        .zip(thetas)
        .map(|(&phi, &y)| (y - offset - b * phi.sin() - c * phi.cos()).powi(2))
        .sum();
    let n = phis.len() as f64;
    let sigma2 = if phis.len() > 3 { rss / (n - 3.0) } else { 0.0 };
    let coefficient_stderr = 0.5 * ((sigma2 * inv[(1, 1)]).sqrt() + (sigma2 * inv[(2, 2)]).sqrt());
    let amplitude = 2.0 * b.hypot(c);
    let xi = if amplitude > 0.0 { c.atan2(b).rem_euclid(TAU) } else { 0.0 };
    Ok(SinusoidFit {
        amplitude,
        xi,
        theta_bar: offset,
        fractional_amplitude: if offset != 0.0 { amplitude / offset } else { f64::INFINITY },
        residual_rms: (rss / n).sqrt(),
        coefficient_stderr,
    })
}

/// Evenly spaced phases `2π k / n`, k = 0..n.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}
