//! Command-line front end: predictions, trace simulation, analysis, gain
//! sweeps and efficiency fits driven by a JSON run configuration.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod output;

pub use commands::{analyze, fit, predict, report, simulate, sweep_gain, FitArgs};
pub use error::{CliError, CliResult};

pub const SIGNAL_X_FILE: &str = "signal_x.frames";
pub const SIGNAL_P_FILE: &str = "signal_p.frames";
pub const SHOT_FILE: &str = "shot.frames";

#[derive(Debug, Parser)]
#[command(name = "eprsim", version, about = "Ultrafast EPR correlation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit timestamps so identical inputs give byte-identical output.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form efficiencies and expected levels, no synthesis.
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize signal and shot-noise frame files.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Analyze frame files written by `simulate`.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Directory holding the three frame files.
        #[arg(long)]
        frames: PathBuf,
    },
    /// Predicted levels over a list of PSA gains, as CSV.
    SweepGain {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gains in dB.
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,6,8,10,12,14,16,18,20,22,24,26,28,30")]
        gains: Vec<f64>,
    },
    /// Fit pre- and post-PSA efficiencies to measured levels.
    Fit {
        #[command(flatten)]
        common: Common,
        /// CSV with a `gain_db` (or linear `gain`) column and a `db` (or
        /// `x_minus_db`) column; optional `quadrature` and `x_plus_db`.
        #[arg(long)]
        observations: PathBuf,
        /// Fixed squeezing parameter, or `free`. Defaults to the configured
        /// value when a config is given, otherwise `free`.
        #[arg(long)]
        r0: Option<String>,
    },
    /// Predict, simulate and analyze in one streaming pass.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Predict { common } => predict(&common),
        Command::Simulate { common } => simulate(&common),
        Command::Analyze { common, frames } => analyze(&common, &frames),
        Command::SweepGain { common, gains } => sweep_gain(&common, &gains),
        Command::Fit {
            common,
            observations,
            r0,
        } => fit(&FitArgs {
            common,
            observations,
            r0,
        }),
        Command::Report { common } => report(&common),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eprsim: {e}");
            e.exit_code()
        }
    }
}
