// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! `raman-xtalk`: run the crosstalk experiments from a TOML configuration.
//!
//! Exit status: 0 success, 1 I/O or internal failure, 2 configuration or
//! usage error, 3 infeasible frequency plan, 4 a `verify` check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use raman_xtalk::config::{ConfigError, RunConfig};
use raman_xtalk::experiments::{
    run_cnot_truth_table, run_crosstalk_matrix, run_line_scan, run_ms_phase_scan, run_phase_scan, ExperimentError,
    ExperimentRecord,
};
use raman_xtalk::freq_plan::PlanError;
use raman_xtalk::{report, verify};

#[derive(Parser)]
#[command(name = "raman-xtalk", version, about = "Crosstalk experiments for Raman-driven qubit chains")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for plans and shot sampling.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Randomized detuning plan (on) or all beams at one detuning (off).
    #[arg(long, global = true, value_enum)]
    mitigated: Option<Switch>,
    /// Shots per measured point; 0 reports exact populations.
    #[arg(long, global = true, value_name = "N")]
    shots: Option<u64>,
    /// Also write an SVG figure per experiment.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Print a detuning plan as JSON.
    Plan,
    /// Rabi rate of one ion scanned across one beam.
    Linescan,
    /// Rate-ratio matrix with each ion as target in turn.
    XtalkMatrix,
    /// Parallel pi/2 pulses with the phase of ion 1 scanned.
    PhaseScan,
    /// Bare MS and ZZ-composite angles versus phase for ion pairs.
    MsScan,
    /// Composite CNOT truth table.
    Cnot,
    /// Run the self-check suite and print a pass/fail table.
    Verify,
}

enum Failure {
    Config(String),
    Infeasible(String),
    Verify,
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Verify => 4,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            PlanError::InvalidParameters(_) => Failure::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Plan(p) => p.into(),
            ExperimentError::Invalid(_) | ExperimentError::Chain(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = cli.shots {
        cfg.experiments.shots = shots;
    }
    if let Some(m) = cli.mitigated {
        cfg.plan.mitigated = matches!(m, Switch::On);
    }
    if cli.svg {
        cfg.emit_svg = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn emit(dir: &Path, cfg: &RunConfig, record: &ExperimentRecord) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
    let id = &record.experiment_id;
    write(dir, &format!("{id}.csv"), &report::measurements_csv(record))?;
    if let Some(m) = report::matrix_csv(record) {
        write(dir, &format!("{id}.matrix.csv"), &m)?;
    }
    write(dir, &format!("{id}.json"), &report::summary_json(record, Some(cfg)))?;
    if cfg.emit_svg {
        write(dir, &format!("{id}.svg"), &report::svg(record))?;
    }
    Ok(())
}

fn need_ions(cfg: &RunConfig, n: usize, what: &str) -> Result<(), Failure> {
    if cfg.chain.n_ions < n {
        return Err(Failure::Config(format!("{what} needs at least {n} ions")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let chain = cfg.chain();
    let profile = cfg.profile()?;
    let opts = cfg.channel_options();
    let sampling = verify::sampling(&cfg);
    let dir = out_dir(cli, &cfg);
    let record = match cli.command {
        Command::Plan => {
            let plan = cfg.distinct_plan()?;
            println!("{}", serde_json::to_string_pretty(&plan.document()).expect("plan serializes"));
            return Ok(());
        }
        Command::Verify => {
            let checks = verify::run_all(&cfg);
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            for c in &checks {
                println!("{:<width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
            return if checks.iter().all(|c| c.passed) { Ok(()) } else { Err(Failure::Verify) };
        }
        Command::Linescan => {
            let e = &cfg.experiments;
            run_line_scan(&chain, &profile, &opts, e.line_scan_points, e.line_scan_span_um, &sampling)?
        }
        Command::XtalkMatrix => run_crosstalk_matrix(&chain, &profile, &cfg.active_plan()?, &opts, &sampling)?,
        Command::PhaseScan => {
            need_ions(&cfg, 2, "phase-scan")?;
            run_phase_scan(&chain, &profile, &cfg.active_plan()?, &opts, cfg.experiments.phase_points, 1, &sampling)?
        }
        Command::MsScan => {
            need_ions(&cfg, 2, "ms-scan")?;
            let pairs: Vec<(usize, usize)> = (1..cfg.chain.n_ions.min(4)).map(|b| (0, b)).collect();
            let e = &cfg.experiments;
            run_ms_phase_scan(&chain, &profile, &pairs, e.ms_base_angle_rad, e.ms_phase_points, &sampling)?
        }
        Command::Cnot => {
            need_ions(&cfg, 2, "cnot")?;
            run_cnot_truth_table(&chain, &profile, cfg.experiments.cnot_inject_error, &sampling)?
        }
    };
    emit(&dir, &cfg, &record)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Infeasible(m) => eprintln!("{m}"),
                Failure::Verify => eprintln!("verify: one or more checks failed"),
                Failure::Other(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
