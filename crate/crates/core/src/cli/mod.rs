//! Command-line front end for `mml-estim`.
//!
//! Every command reads an optional flat `key = value` config file
//! (`--config`), then positional `key=value` overrides, then the dedicated
//! flags. Exit codes: 0 ok, 1 verification failure, 2 I/O or config error,
//! 3 numerical failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
pub use config::{Command, RunConfig};

/// Environment variable capping simulation workers (0 = automatic).
pub const THREADS_ENV: &str = "MML_ESTIM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mml-estim", version, about = "Wallace-Freeman (MML87) estimation, bias and codelength tools")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Fit the MLE and Wallace-Freeman estimates to a data file
    Fit(CommonArgs),
    /// First-order bias table for the Weibull family over a (k, lambda, n) grid
    BiasTable(CommonArgs),
    /// Message length of a data file at a parameter value
    Codelength(CommonArgs),
    /// Monte Carlo study of both estimators
    Simulate(CommonArgs),
    /// Run the acceptance checks
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("field 'format': expected csv or json, got '{other}'"))),
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat key=value configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write output here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Reduced replicate counts for a quick verification run
    #[arg(long)]
    fast: bool,
    /// Report message lengths in bits instead of nats
    #[arg(long)]
    bits: bool,
    /// key=value overrides applied after the config file
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonArgs {
    fn into_config(self, command: Command) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(command);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for a in &self.overrides {
            cfg.apply_assignment(a)?;
        }
        if let Some(out) = &self.out {
            cfg.set("out", &out.display().to_string())?;
        }
        if let Some(f) = self.format {
            cfg.set("format", if f == Format::Csv { "csv" } else { "json" })?;
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        if self.fast {
            cfg.set("fast", "true")?;
        }
        if self.bits {
            cfg.set("units", "bits")?;
        }
        Ok(cfg)
    }
}

/// Output of a command: text to emit plus the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn format_of(cfg: &RunConfig, default: Format) -> Result<Format> {
    cfg.get("format").map_or(Ok(default), Format::parse)
}

fn threads(cfg: &RunConfig) -> Result<usize> {
    if cfg.get("threads").is_some() {
        return cfg.parse_or("threads", 0);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => config::parse_field(THREADS_ENV, &v),
        _ => Ok(0),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let outcome = match cfg.command {
        Command::Fit => commands::fit(cfg)?,
        Command::BiasTable => commands::bias_table(cfg)?,
        Command::Codelength => commands::codelength(cfg)?,
        Command::Simulate => commands::simulate(cfg)?,
        Command::Verify => commands::verify(cfg)?,
    };
    if let Some(path) = cfg.get("out") {
        fs::write(path, &outcome.text).map_err(|e| Error::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(outcome)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (command, args) = match cli.command {
        Sub::Fit(a) => (Command::Fit, a),
        Sub::BiasTable(a) => (Command::BiasTable, a),
        Sub::Codelength(a) => (Command::Codelength, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Verify(a) => (Command::Verify, a),
    };
    let result = args.into_config(command).and_then(|cfg| {
        let out = execute(&cfg)?;
        if cfg.get("out").is_none() {
            print!("{}", out.text);
        }
        Ok(out.code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mml-estim {}: {e}", command.name());
            exit_code(&e)
        }
    }
}
