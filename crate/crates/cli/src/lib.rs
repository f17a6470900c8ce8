//! `duplex`: reproducible portfolio experiments from a config file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use duplex_core::env::AccountingMode;

use crate::config::{ExperimentConfig, Overrides, Strategy};
use crate::error::{CliError, Result, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "duplex", version, about = "Two-sided portfolio rebalancing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Paper,
    Strict,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Accounting of fees in the value update.
    #[arg(long, value_enum, global = true)]
    pub mode: Option<Mode>,
    /// Directory written by `ingest`; the config's data files are used otherwise.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, resample, align and split the candle files; write frames and a manifest.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Run one strategy over the test slice.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// equal_weight, sppo:MV, sppo:MAD, sppo:CVaR, rl:pnl or rl:return
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the agent on the train slice.
    Train {
        #[command(flatten)]
        common: Common,
        /// rl:pnl or rl:return
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        max_updates: Option<u64>,
        #[arg(long)]
        max_seconds: Option<f64>,
    },
    /// Efficient frontier at one decision row.
    Frontier {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strategy: Option<String>,
        /// Rebalancing-interval row; the first test decision by default.
        #[arg(long)]
        row: Option<usize>,
    },
    /// Table of metrics for several traces, given as NAME=PATH or PATH.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        traces: Vec<String>,
    },
    /// Metrics for a single trace.
    Report {
        #[command(flatten)]
        common: Common,
        trace: PathBuf,
    },
}

fn parse_strategy(s: &Option<String>) -> Result<Option<Strategy>> {
    s.as_deref()
        .map(|s| s.parse().map_err(CliError::Config))
        .transpose()
}

fn resolve(common: &Common, strategy: Option<Strategy>, checkpoint: Option<PathBuf>) -> Result<ExperimentConfig> {
    let over = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        mode: common.mode.map(|m| match m {
            Mode::Paper => AccountingMode::Paper,
            Mode::Strict => AccountingMode::Strict,
        }),
        strategy,
        checkpoint,
    };
    ExperimentConfig::build(common.config.as_deref(), &over)
}

/// Executes a parsed command and returns a one-line summary.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Ingest { common } => {
            let mut cfg = resolve(&common, None, None)?;
            let m = commands::ingest(&mut cfg)?;
            Ok(format!(
                "ingested {} assets, {} rows at {}h, manifest {}",
                m.assets, m.interval_rows, m.interval_hours, m.hash
            ))
        }
        Command::Backtest {
            common,
            strategy,
            checkpoint,
        } => {
            let mut cfg = resolve(&common, parse_strategy(&strategy)?, checkpoint)?;
            let out = commands::backtest(&mut cfg, common.data.as_deref())?;
            Ok(format!(
                "{}: total return {:.3}% over {} steps",
                out.label, out.report.total_return, out.report.steps
            ))
        }
        Command::Train {
            common,
            strategy,
            episodes,
            max_updates,
            max_seconds,
        } => {
            let mut cfg = resolve(&common, parse_strategy(&strategy)?, None)?;
            if let Some(e) = episodes {
                cfg.train.budget.episodes = e;
            }
            if max_updates.is_some() {
                cfg.train.budget.max_updates = max_updates;
            }
            if max_seconds.is_some() {
                cfg.train.budget.max_seconds = max_seconds;
            }
            let (sac, curve) = commands::train_agent(&mut cfg, common.data.as_deref())?;
            Ok(format!("trained {} episodes, {} updates", curve.len(), sac.updates))
        }
        Command::Frontier { common, strategy, row } => {
            let mut cfg = resolve(&common, parse_strategy(&strategy)?, None)?;
            let (points, s) = commands::frontier(&mut cfg, common.data.as_deref(), row)?;
            Ok(format!("{} frontier at row {}: {} points", s.measure, s.row, points.len()))
        }
        Command::Compare { common, traces } => {
            let mut cfg = resolve(&common, None, None)?;
            let traces: Vec<_> = traces.iter().map(|t| commands::parse_trace_arg(t)).collect();
            let rows = commands::compare(&mut cfg, common.data.as_deref(), &traces)?;
            Ok(format!("compared {} strategies", rows.len()))
        }
        Command::Report { common, trace } => {
            let mut cfg = resolve(&common, None, None)?;
            let r = commands::report(&mut cfg, common.data.as_deref(), &trace)?;
            Ok(format!("total return {:.3}% over {} steps", r.total_return, r.steps))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("duplex: {e}");
            e.exit_code()
        }
    }
}
