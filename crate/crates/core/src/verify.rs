// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Self-check suite run by `raman-xtalk verify`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dynamics::{evolve_channels, max_stable_dt_us, MsModel};
use crate::experiments::{ms_model_peak_to_peak, run_cnot_truth_table, run_crosstalk_matrix, Sampling, Summary};
use crate::freq_plan::{FrequencyPlan, RamanChannel};
use crate::gates::{
    cnot, compile, cnot_composite, process_fidelity, pulses_unitary, truth_table, zz, zz_composite, GateElement,
    GateSequence, PulseModel, Unitary,
};
use crate::linalg::phase_insensitive_distance;
use crate::stats::wilson_interval;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn resonant(rate_hz: f64, detuning_hz: f64) -> RamanChannel {
    RamanChannel { site: 0, rabi_amplitude_hz: Complex64::new(rate_hz, 0.0), two_photon_detuning_hz: detuning_hz, source_tones: (0, 1) }
}

fn integrator() -> Check {
    let run = || -> Result<(f64, f64, f64), String> {
        let ch = [resonant(10e3, 0.0)];
        let dt = 0.01;
        let tr = evolve_channels(&ch, 1000.0 * dt, dt).map_err(|e| e.to_string())?;
        let rabi = tr
            .times_us
            .iter()
            .zip(&tr.populations)
            .map(|(t, p)| (p - (PI * 10e3 * t * 1e-6).sin().powi(2)).abs())
            .fold(0.0, f64::max);
        let u = tr.final_unitary;
        let norm = (u.adjoint() * u - crate::linalg::Matrix2c::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let det = [resonant(10e3, 10e3)];
        let tr = evolve_channels(&det, 100.0, max_stable_dt_us(&det).min(0.01)).map_err(|e| e.to_string())?;
        let peak = tr.populations.iter().copied().fold(0.0, f64::max);
        Ok((rabi, norm, (peak - 0.5).abs()))
    };
    match run() {
        Ok((rabi, norm, gen)) => check(
            "integrator oracles",
            rabi < 1e-6 && norm < 1e-9 && gen < 1e-4,
            format!("resonant err {rabi:.2e}, unitarity {norm:.2e}, generalized peak err {gen:.2e}"),
        ),
        Err(e) => check("integrator oracles", false, e),
    }
}

fn composites() -> Check {
    let worst_zz = (0..20)
        .map(|k| {
            let theta = -PI + 2.0 * PI * k as f64 / 19.0;
            phase_insensitive_distance(zz_composite(theta).unitary.matrix(), Unitary::from(zz(theta)).matrix())
        })
        .fold(0.0, f64::max);
    let f = process_fidelity(&cnot_composite().unitary, &Unitary::from(cnot())).unwrap_or(0.0);
    check("composite gates", worst_zz < 1e-9 && (f - 1.0).abs() < 1e-9, format!("zz distance {worst_zz:.2e}, cnot process fidelity {f:.12}"))
}

fn phase_agnosticism(cfg: &RunConfig) -> Check {
    let run = || -> Result<(f64, f64), String> {
        let chain = cfg.chain();
        let profile = cfg.profile().map_err(|e| e.to_string())?;
        let model = MsModel::for_pair(&chain, &profile, 0, 1, FRAC_PI_2);
        let pm = PulseModel { ms_crosstalk: Some(model), ..PulseModel::default() };
        let table = |pre: f64| -> Result<[[f64; 4]; 4], String> {
            let mut seq = GateSequence::new(2);
            seq.push(GateElement::rz_virtual(0, pre)).map_err(|e| e.to_string())?;
            seq.push(GateElement::zz(0, 1, FRAC_PI_2)).map_err(|e| e.to_string())?;
            let (pulses, frames) = compile(&seq);
            Ok(truth_table(&Unitary(frames.correction() * pulses_unitary(&pulses, 2, &pm).0)))
        };
        let base = table(0.0)?;
        let mut worst = 0.0f64;
        for k in 1..8 {
            let t = table(k as f64 * PI / 4.0)?;
            for r in 0..4 {
                for c in 0..4 {
                    worst = worst.max((t[r][c] - base[r][c]).abs());
                }
            }
        }
        let bare = (model.effective_angle(0.0) - model.effective_angle(PI)).abs();
        Ok((worst, bare))
    };
    match run() {
        Ok((worst, bare)) => check(
            "phase agnosticism",
            worst < 1e-9 && bare > 1e-3,
            format!("zz truth-table change {worst:.2e}, bare MS angle change {bare:.3e} rad"),
        ),
        Err(e) => check("phase agnosticism", false, e),
    }
}

fn statistics() -> Check {
    match wilson_interval(50, 100, 0.95) {
        Ok((lo, hi)) => check(
            "wilson interval",
            (lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3,
            format!("wilson(50, 100) = ({lo:.4}, {hi:.4})"),
        ),
        Err(e) => check("wilson interval", false, e.to_string()),
    }
}

fn plan(cfg: &RunConfig) -> Check {
    match (cfg.distinct_plan(), cfg.distinct_plan()) {
        (Ok(a), Ok(b)) => check(
            "frequency plan",
            a == b && a.satisfies_constraints(),
            format!("{} attempts, offsets {:?} Hz", a.attempts_used, a.offsets_hz.iter().map(|o| o.round()).collect::<Vec<_>>()),
        ),
        (Err(e), _) | (_, Err(e)) => check("frequency plan", false, e.to_string()),
    }
}

type MatrixParts = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>);

fn mitigation(cfg: &RunConfig) -> Check {
    let run = || -> Result<(f64, usize, usize), String> {
        let chain = cfg.chain();
        let profile = cfg.profile().map_err(|e| e.to_string())?;
        let opts = cfg.channel_options();
        let sampling = Sampling { shots: 0, ..sampling(cfg) };
        let distinct = cfg.distinct_plan().map_err(|e| e.to_string())?;
        let matrix = |plan: &FrequencyPlan| -> Result<MatrixParts, String> {
            match run_crosstalk_matrix(&chain, &profile, plan, &opts, &sampling).map_err(|e| e.to_string())?.summary {
                Summary::CrosstalkMatrix { ratios, ratio_upper_bounds, rates } => {
                    let unresolved = rates.iter().map(|row| row.iter().map(|r| !r.resolved).collect()).collect();
                    Ok((ratios, ratio_upper_bounds, unresolved))
                }
                _ => Err("unexpected summary".into()),
            }
        };
        let (uniform, _, _) = matrix(&FrequencyPlan::uniform(chain.n_beams()))?;
        let (_, bounds, unresolved) = matrix(&distinct)?;
        let n = uniform.len();
        let (mut worst, mut checked, mut skipped) = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let ratio = uniform[i][j] / bounds[i][j];
                // An unresolved distinct entry only bounds the ratio from
                // below; when the uniform entry sits under that bound too,
                // the pair cannot be compared at this step budget.
                if ratio < 10.0 && unresolved[i][j] {
                    skipped += 1;
                    continue;
                }
                checked += 1;
                worst = worst.min(ratio);
            }
        }
        Ok((worst, checked, skipped))
    };
    match run() {
        Ok((w, checked, skipped)) => check(
            "crosstalk mitigation",
            w >= 10.0,
            format!("smallest uniform/distinct ratio {w:.1} over {checked} entries, {skipped} below the detection floor"),
        ),
        Err(e) => check("crosstalk mitigation", false, e),
    }
}

fn ms_ordering(cfg: &RunConfig) -> Check {
    let chain = cfg.chain();
    let Ok(profile) = cfg.profile() else {
        return check("MS separation ordering", false, "profile".into());
    };
    if chain.n_ions() < 4 {
        return check("MS separation ordering", true, "skipped: fewer than 4 ions".into());
    }
    let p: Vec<f64> = (1..4).map(|b| ms_model_peak_to_peak(&MsModel::for_pair(&chain, &profile, 0, b, FRAC_PI_2))).collect();
    check(
        "MS separation ordering",
        p[0] > p[1] && p[1] > p[2] && p[0] >= 3.0 * p[2],
        format!("peak-to-peak {:.3e} > {:.3e} > {:.3e} rad", p[0], p[1], p[2]),
    )
}

fn cnot_exact(cfg: &RunConfig) -> Check {
    let run = || -> Result<(f64, f64), String> {
        let rec = run_cnot_truth_table(&cfg.chain(), &cfg.profile().map_err(|e| e.to_string())?, false, &Sampling { shots: 0, ..sampling(cfg) })
            .map_err(|e| e.to_string())?;
        match rec.summary {
            Summary::Cnot { truth_table_fidelity, average_gate_fidelity, .. } => Ok((truth_table_fidelity, average_gate_fidelity)),
            _ => Err("unexpected summary".into()),
        }
    };
    match run() {
        Ok((t, a)) => check("ideal CNOT", (t - 1.0).abs() < 1e-9 && (a - 1.0).abs() < 1e-9, format!("truth table {t:.12}, average {a:.12}")),
        Err(e) => check("ideal CNOT", false, e),
    }
}

fn config_round_trip(cfg: &RunConfig) -> Check {
    match RunConfig::from_toml(&cfg.to_toml()) {
        Ok(back) => check("config round trip", &back == cfg, format!("hash {}", &cfg.hash()[..16])),
        Err(e) => check("config round trip", false, e.to_string()),
    }
}

pub fn sampling(cfg: &RunConfig) -> Sampling {
    let e = &cfg.experiments;
    Sampling { shots: e.shots, seed: cfg.seed, confidence: e.confidence, rabi_samples: e.rabi_samples, max_steps: e.max_steps }
}

/// Every check, in a fixed order.
pub fn run_all(cfg: &RunConfig) -> Vec<Check> {
    let mut out = vec![integrator(), composites(), phase_agnosticism(cfg), statistics(), plan(cfg)];
    if cfg.chain.n_ions >= 2 {
        out.push(mitigation(cfg));
        out.push(ms_ordering(cfg));
        out.push(cnot_exact(cfg));
    }
    out.push(config_round_trip(cfg));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes() {
        let checks = run_all(&RunConfig::default());
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(checks.len(), 9);
    }
}
