// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::FRAC_PI_2;

use raman_xtalk::chain::{BeamProfile, ChainConfig};
use raman_xtalk::config::RunConfig;
use raman_xtalk::experiments::*;
use raman_xtalk::freq_plan::{ChannelOptions, FrequencyPlan};

fn defaults() -> (RunConfig, ChainConfig, BeamProfile, ChannelOptions) {
    let cfg = RunConfig::default();
    let (chain, profile, opts) = (cfg.chain(), cfg.profile().unwrap(), cfg.channel_options());
    (cfg, chain, profile, opts)
}

fn ratios(rec: &ExperimentRecord) -> Vec<Vec<f64>> {
    match &rec.summary {
        Summary::CrosstalkMatrix { ratios, .. } => ratios.clone(),
        _ => panic!("not a matrix"),
    }
}

#[test]
fn line_scan_with_shot_noise() {
    let (_, chain, profile, opts) = defaults();
    let rec = run_line_scan(&chain, &profile, &opts, 3, 9.0, &Sampling::default()).unwrap();
    let Summary::LineScan { relative_rates, .. } = &rec.summary else { panic!() };
    assert!((relative_rates[1] - 1.0).abs() < 0.02, "{relative_rates:?}");
    assert!((relative_rates[0] - 0.05).abs() < 0.005, "{relative_rates:?}");
    assert_eq!(rec.measurements.len(), 3 * 64);
    assert!(rec.measurements.iter().all(|m| m.lo <= m.value && m.value <= m.hi && m.shots == 2000));
}

#[test]
fn symmetric_profile_gives_symmetric_scan() {
    let (_, chain, _, opts) = defaults();
    let rec = run_line_scan(&chain, &BeamProfile::gaussian(1.6), &opts, 9, 6.0, &Sampling::default().exact()).unwrap();
    let Summary::LineScan { relative_rates, .. } = &rec.summary else { panic!() };
    for k in 0..4 {
        let (a, b) = (relative_rates[k], relative_rates[8 - k]);
        assert!((a - b).abs() <= 1e-6 * a.max(b), "{k}: {a} vs {b}");
    }
}

#[test]
fn uniform_matrix_left_neighbor_entry() {
    let (_, chain, profile, opts) = defaults();
    let rec = run_crosstalk_matrix(&chain, &profile, &FrequencyPlan::uniform(4), &opts, &Sampling::default()).unwrap();
    let r = ratios(&rec);
    assert!((0.04..=0.10).contains(&r[1][0]), "{}", r[1][0]);
    for (i, row) in r.iter().enumerate() {
        assert_eq!(row[i], 1.0);
    }
}

#[test]
fn distinct_plan_improves_every_entry_tenfold() {
    let (cfg, chain, profile, opts) = defaults();
    let s = Sampling::default();
    let u = run_crosstalk_matrix(&chain, &profile, &FrequencyPlan::uniform(4), &opts, &s).unwrap();
    let d = run_crosstalk_matrix(&chain, &profile, &cfg.distinct_plan().unwrap(), &opts, &s).unwrap();
    let Summary::CrosstalkMatrix { ratio_upper_bounds, .. } = &d.summary else { panic!() };
    let ur = ratios(&u);
    for i in 0..4 {
        for j in (0..4).filter(|&j| j != i) {
            assert!(ur[i][j] >= 10.0 * ratio_upper_bounds[i][j], "({i},{j}): {} vs {}", ur[i][j], ratio_upper_bounds[i][j]);
        }
    }
    assert_eq!(u.experiment_id, "xtalk-matrix-uniform");
    assert_eq!(d.experiment_id, "xtalk-matrix-distinct");
}

#[test]
fn no_crosstalk_source_means_empty_off_diagonals() {
    let (_, chain, profile, opts) = defaults();
    let chain = chain.with_crosstalk_scale(0.0);
    let rec = run_crosstalk_matrix(&chain, &profile, &FrequencyPlan::uniform(4), &opts, &Sampling::default()).unwrap();
    for (i, row) in ratios(&rec).iter().enumerate() {
        assert!(row.iter().enumerate().filter(|&(j, _)| j != i).all(|(_, v)| v.abs() < 1e-6));
    }
}

#[test]
fn phase_scan_without_crosstalk_is_flat() {
    let (_, chain, profile, opts) = defaults();
    let chain = chain.with_crosstalk_scale(0.0);
    let rec = run_phase_scan(&chain, &profile, &FrequencyPlan::uniform(4), &opts, 12, 1, &Sampling::default()).unwrap();
    let Summary::PhaseScan { consistent_with_zero, fits, .. } = &rec.summary else { panic!() };
    assert!(consistent_with_zero.iter().all(|&z| z), "{fits:?}");
    let exact = run_phase_scan(&chain, &profile, &FrequencyPlan::uniform(4), &opts, 12, 1, &Sampling::default().exact()).unwrap();
    let Summary::PhaseScan { fractional_amplitudes, fits, .. } = &exact.summary else { panic!() };
    assert!(fractional_amplitudes.iter().all(|a| a.abs() < 1e-9));
    assert!(fits.iter().all(|f| (f.theta_bar - FRAC_PI_2).abs() < 1e-6));
}

#[test]
fn phase_scan_uniform_left_neighbor_sees_the_scanned_phase() {
    let (_, chain, profile, opts) = defaults();
    let rec = run_phase_scan(&chain, &profile, &FrequencyPlan::uniform(4), &opts, 12, 1, &Sampling::default().exact()).unwrap();
    let Summary::PhaseScan { fractional_amplitudes, .. } = &rec.summary else { panic!() };
    // First-order interference: A / θ̄ ≈ 2 ε with ε = 0.05.
    assert!((fractional_amplitudes[0] - 0.1).abs() < 0.01, "{fractional_amplitudes:?}");
}

#[test]
fn ms_scan_properties() {
    let (_, chain, profile, _) = defaults();
    let pairs = [(0, 1), (0, 2), (0, 3)];
    let rec = run_ms_phase_scan(&chain, &profile, &pairs, FRAC_PI_2, 24, &Sampling::default()).unwrap();
    let Summary::MsScan { pairs: p } = &rec.summary else { panic!() };
    assert!(p[0].model_peak_to_peak >= 3.0 * p[2].model_peak_to_peak);
    assert!(p[0].bare_fit.amplitude >= 3.0 * p[2].bare_fit.amplitude);
    assert!(p.iter().all(|s| s.zz_fit.consistent_with_zero()), "{p:?}");

    let flat = chain.with_crosstalk_scale(0.0);
    let rec = run_ms_phase_scan(&flat, &profile, &pairs, FRAC_PI_2, 24, &Sampling::default().exact()).unwrap();
    let Summary::MsScan { pairs: p } = &rec.summary else { panic!() };
    assert!(p.iter().all(|s| s.bare_fit.amplitude < 1e-12 && s.model_peak_to_peak < 1e-12));
}

#[test]
fn cnot_finite_shots() {
    let (_, chain, profile, _) = defaults();
    let s = Sampling { shots: 500, ..Sampling::default() };
    let rec = run_cnot_truth_table(&chain, &profile, false, &s).unwrap();
    let Summary::Cnot { truth_table_fidelity, hi, .. } = &rec.summary else { panic!() };
    assert!(*truth_table_fidelity >= 0.99);
    for (input, out) in [0usize, 1, 3, 2].iter().enumerate() {
        assert_eq!(hi[input][*out], 1.0);
    }
}

#[test]
fn records_are_deterministic_and_rerunnable_from_metadata() {
    let (cfg, chain, profile, opts) = defaults();
    let plan = cfg.distinct_plan().unwrap();
    let s = Sampling { seed: 123, ..Sampling::default() };
    let a = run_crosstalk_matrix(&chain, &profile, &plan, &opts, &s).unwrap();
    let b = run_crosstalk_matrix(&chain, &profile, &plan, &opts, &s).unwrap();
    assert_eq!(a, b);
    let m = &a.metadata;
    let again = run_crosstalk_matrix(&m.chain, &m.profile, m.plan.as_ref().unwrap(), &m.channel_options.unwrap(), &m.sampling).unwrap();
    assert_eq!(again, a);
    let c = run_crosstalk_matrix(&chain, &profile, &plan, &opts, &Sampling { seed: 124, ..s }).unwrap();
    assert_ne!(a.measurements, c.measurements);
}

#[test]
fn record_json_round_trips() {
    let (_, chain, profile, opts) = defaults();
    let rec = run_line_scan(&chain, &profile, &opts, 4, 8.0, &Sampling::default()).unwrap();
    let text = serde_json::to_string(&rec).unwrap();
    let back: ExperimentRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rec);
}

#[test]
fn invalid_parameters_are_rejected() {
    let (_, chain, profile, opts) = defaults();
    let s = Sampling::default();
    assert!(matches!(run_line_scan(&chain, &profile, &opts, 1, 9.0, &s), Err(ExperimentError::Invalid(_))));
    assert!(matches!(
        run_phase_scan(&chain, &profile, &FrequencyPlan::uniform(4), &opts, 6, 1, &s),
        Err(ExperimentError::Invalid(_))
    ));
    assert!(matches!(
        run_crosstalk_matrix(&chain, &profile, &FrequencyPlan::uniform(3), &opts, &s),
        Err(ExperimentError::Invalid(_))
    ));
    assert!(run_ms_phase_scan(&chain, &profile, &[(0, 0)], 1.0, 12, &s).is_err());
}
