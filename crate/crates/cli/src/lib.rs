//! Experiment runner: reads a TOML config, runs one subcommand and writes a
//! JSON report with CSV tables into an output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use surfdyn::Exec;

pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use error::{CliError, ErrorRecord};
pub use report::{Report, Status, CONFIG_ECHO_FILE, REPORT_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    PeriodicScan,
    DominationCertify,
    Pliss,
    Manifolds,
    ForgeTangency,
    Distortion,
    Verdict,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PeriodicScan => "periodic-scan",
            Command::DominationCertify => "domination-certify",
            Command::Pliss => "pliss",
            Command::Manifolds => "manifolds",
            Command::ForgeTangency => "forge-tangency",
            Command::Distortion => "distortion",
            Command::Verdict => "verdict",
        }
    }
}

fn dispatch(command: Command, cfg: &ExperimentConfig) -> Result<commands::Outcome, CliError> {
    let map = cfg.map.build()?;
    let exec = Exec::from_flag(cfg.parallel);
    match command {
        Command::PeriodicScan => commands::periodic_scan(map.as_ref(), cfg, exec),
        Command::DominationCertify => commands::domination_certify(map.as_ref(), cfg, exec),
        Command::Pliss => commands::pliss(map.as_ref(), cfg),
        Command::Manifolds => commands::manifolds(map.as_ref(), cfg, exec),
        Command::ForgeTangency => commands::forge(map, cfg, exec),
        Command::Distortion => commands::distortion(map.as_ref(), cfg),
        Command::Verdict => commands::verdict(map.as_ref(), cfg, exec),
    }
}

/// Runs a command and writes `report.json`, `config.echo.toml` and the CSV
/// tables into `out_dir`. Model errors end up in the report with
/// `Status::Error`; only failures to write the output are returned as `Err`.
pub fn run(command: Command, mut cfg: ExperimentConfig, out_dir: &Path, seed: Option<u64>) -> Result<Report, CliError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(CONFIG_ECHO_FILE), cfg.to_toml()?)?;
    let start = Instant::now();
    let outcome = dispatch(command, &cfg);
    let mut files = vec![CONFIG_ECHO_FILE.to_string()];
    let (status, result, error) = match outcome {
        Ok(o) => {
            for t in &o.tables {
                t.write(out_dir)?;
                files.push(t.name.clone());
            }
            (o.status, Some(o.result), None)
        }
        Err(e) => (Status::Error, None, Some(e.record())),
    };
    let report = Report {
        schema_version: report::REPORT_SCHEMA_VERSION,
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        status,
        result,
        error,
        files,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    report.write(out_dir)?;
    Ok(report)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_toml(&fs::read_to_string(path)?)
}
