//! `zeno` command-line front end.

pub mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::ZenoError;
use crate::sim::SimMode;
use config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "zeno", version, about = "Drive/probe measurement statistics of a single two-level ion")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output file; overrides the config.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Simulation mode; overrides the config.
    #[arg(long, global = true, value_parser = ["markov", "bloch"])]
    pub mode: Option<String>,
    /// Worker threads. Output never depends on this.
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived rates and repeat probabilities.
    Derive,
    /// Write a trajectory file.
    Simulate,
    /// Write a single-pulse excitation spectrum as CSV.
    Spectrum,
    /// Fit a trajectory file and write its run histogram.
    Analyze {
        /// Trajectory file to analyze.
        trajectories: PathBuf,
    },
    /// Estimate δb from measured phases or a simulated protocol.
    ZenoTest,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] ZenoError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Input(_) | Self::Usage(_) => 2,
            Self::Io { .. } => 4,
            Self::Model(e) => match e {
                ZenoError::ImaginaryNutation { .. } => 3,
                ZenoError::InsufficientData(_)
                | ZenoError::EmptyTrajectory
                | ZenoError::NoRuns(_)
                | ZenoError::DegenerateHistogram(_)
                | ZenoError::NonInvertible(_)
                | ZenoError::NoGroundOccurrences => 5,
                ZenoError::OutOfBranch { .. } => 6,
                _ => 2,
            },
        }
    }
}

/// Parses `args` and runs the selected command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(sink, "{e}");
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(0) => Err(CliError::Usage("--threads must be ≥ 1".into())),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli)),
            Err(e) => Err(CliError::Usage(format!("cannot start {k} threads: {e}"))),
        },
        None => commands::dispatch(&cli),
    };
    match result.and_then(|text| stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "zeno: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn mode_override(global: &GlobalArgs) -> Option<SimMode> {
    global.mode.as_deref().and_then(|m| m.parse().ok())
}
