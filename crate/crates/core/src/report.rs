// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Serialized forms of an [`ExperimentRecord`]: long-format CSV, a matrix CSV
//! for the crosstalk and truth-table experiments, a JSON summary and an
//! optional SVG figure.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::RunConfig;
use crate::experiments::{ExperimentRecord, Measurement, Metadata, ScanAxis, Summary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment_id: &'a str,
    group: &'a str,
    ion: Option<usize>,
    x: f64,
    t_us: Option<f64>,
    value: f64,
    successes: Option<u64>,
    shots: u64,
    lo: f64,
    hi: f64,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("flush to Vec")).expect("CSV is UTF-8")
}

/// One row per measurement:
/// `experiment_id,group,ion,x,t_us,value,successes,shots,lo,hi`.
pub fn measurements_csv(record: &ExperimentRecord) -> String {
    to_csv(record.measurements.iter().map(|m| CsvRow {
        experiment_id: &record.experiment_id,
        group: &m.group,
        ion: m.ion,
        x: m.x,
        t_us: m.t_us,
        value: m.value,
        successes: m.successes,
        shots: m.shots,
        lo: m.lo,
        hi: m.hi,
    }))
}

#[derive(Serialize)]
struct MatrixRow {
    row: usize,
    col: usize,
    value: f64,
    upper_bound: f64,
    rate_hz: Option<f64>,
    resolved: Option<bool>,
}

/// `row,col,value,upper_bound,rate_hz,resolved` for the crosstalk matrix
/// (row = target, col = ion) and the truth table (row = input, col = output).
pub fn matrix_csv(record: &ExperimentRecord) -> Option<String> {
    match &record.summary {
        Summary::CrosstalkMatrix { rates, ratios, ratio_upper_bounds } => {
            let n = ratios.len();
            Some(to_csv((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| MatrixRow {
                row: i,
                col: j,
                value: ratios[i][j],
                upper_bound: ratio_upper_bounds[i][j],
                rate_hz: Some(rates[i][j].rate_hz),
                resolved: Some(rates[i][j].resolved),
            })))
        }
        Summary::Cnot { populations, hi, .. } => {
            Some(to_csv((0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| MatrixRow {
                row: i,
                col: j,
                value: populations[i][j],
                upper_bound: hi[i][j],
                rate_hz: None,
                resolved: None,
            })))
        }
        _ => None,
    }
}

#[derive(Serialize)]
struct Interval<'a> {
    group: &'a str,
    ion: Option<usize>,
    x: f64,
    t_us: Option<f64>,
    value: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    schema_version: u32,
    experiment_id: &'a str,
    config_hash: Option<String>,
    config: Option<&'a RunConfig>,
    scan_axis: &'a ScanAxis,
    fits: &'a Summary,
    intervals: Vec<Interval<'a>>,
    metadata: &'a Metadata,
}

/// Pretty-printed JSON summary; `config` adds the run snapshot and its hash.
pub fn summary_json(record: &ExperimentRecord, config: Option<&RunConfig>) -> String {
    let doc = SummaryDocument {
        schema_version: SCHEMA_VERSION,
        experiment_id: &record.experiment_id,
        config_hash: config.map(RunConfig::hash),
        config,
        scan_axis: &record.scan_axis,
        fits: &record.summary,
        intervals: record
            .measurements
            .iter()
            .map(|m: &Measurement| Interval { group: &m.group, ion: m.ion, x: m.x, t_us: m.t_us, value: m.value, lo: m.lo, hi: m.hi })
            .collect(),
        metadata: &record.metadata,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
    s.push('\n');
    s
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    s
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    (x0, x1, y0, y1)
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut s = svg_open(title);
    let (x0, x1, y0, y1) = bounds(series);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{ylabel}</text>"#, H / 2.0, H / 2.0);
    for (v, anchor, x, y) in [
        (x0, "start", px(x0), H - MARGIN + 16.0),
        (x1, "end", px(x1), H - MARGIN + 16.0),
        (y0, "end", MARGIN - 4.0, py(y0)),
        (y1, "end", MARGIN - 4.0, py(y1) + 10.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, pts.join(" "));
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn value_table(title: &str, row_label: &str, values: &[Vec<f64>]) -> String {
    let mut s = svg_open(title);
    let n = values.len();
    let cell = ((W - 2.0 * MARGIN) / (n as f64 + 1.0)).min(110.0);
    for j in 0..n {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{j}</text>"#, MARGIN + cell * (j as f64 + 1.5), MARGIN);
    }
    for (i, row) in values.iter().enumerate() {
        let y = MARGIN + cell * 0.5 * (i as f64 + 1.0) + 14.0;
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{y:.1}">{row_label} {i}</text>"#);
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" text-anchor="middle">{v:.3e}</text>"#, MARGIN + cell * (j as f64 + 1.5));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn bar_chart(title: &str, populations: &[Vec<f64>]) -> String {
    let mut s = svg_open(title);
    let n = populations.len() * populations.first().map_or(0, Vec::len);
    let slot = (W - 2.0 * MARGIN) / n.max(1) as f64;
    let base = H - MARGIN;
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, W - MARGIN);
    for (i, row) in populations.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let k = i * row.len() + j;
            let h = p.clamp(0.0, 1.0) * (H - 2.0 * MARGIN);
            let x = MARGIN + slot * k as f64 + 2.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                base - h,
                slot - 4.0,
                PALETTE[i % PALETTE.len()]
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{i:02b}>{j:02b}</text>"#, x + slot / 2.0 - 2.0, base + 14.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn grouped(record: &ExperimentRecord, keep: impl Fn(&Measurement) -> Option<String>) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for m in &record.measurements {
        if let Some(label) = keep(m) {
            match out.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((m.x, m.value)),
                None => out.push(Series { label, points: vec![(m.x, m.value)] }),
            }
        }
    }
    out
}

/// A static figure for the record. Presentation only.
pub fn svg(record: &ExperimentRecord) -> String {
    match &record.summary {
        Summary::LineScan { relative_rates, .. } => {
            let points = record.scan_axis.values.iter().copied().zip(relative_rates.iter().copied()).collect();
            line_chart("Rabi rate across one beam", "ion position (um)", "rate / reference", &[Series { label: "rate".into(), points }])
        }
        Summary::CrosstalkMatrix { ratios, .. } => value_table(&format!("{}: rate ratio (row target, column ion)", record.experiment_id), "target", ratios),
        Summary::PhaseScan { .. } => {
            let series = grouped(record, |m| (m.group == "angle").then(|| format!("q{}", m.ion.unwrap_or(0))));
            line_chart("Pulse angle vs Raman phase", "phase (rad)", "angle (rad)", &series)
        }
        Summary::MsScan { .. } => {
            let series = grouped(record, |m| Some(m.group.clone()));
            line_chart("MS angle vs phase", "phase (rad)", "angle (rad)", &series)
        }
        Summary::Cnot { populations, .. } => bar_chart("CNOT truth table (input>output)", populations),
    }
}
