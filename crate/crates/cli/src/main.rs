//! Command-line front end for the dual-element tweezer array simulator.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "dualarray", version, about = "Dual-element Rb/Cs optical tweezer array simulator")]
pub struct Cli {
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed, or an inclusive range `A..B` for `continuous`.
    #[arg(long, global = true, default_value = "0")]
    pub seed: String,
    /// Output directory.
    #[arg(long, global = true, env = "DUALARRAY_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an SLM phase mask for the configured geometry.
    Holo {
        /// Geometry override: `.json` geometry object, `.csv` site table, or bitmap text.
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Crossed-AOD planning.
    Aod {
        #[command(subcommand)]
        action: AodAction,
    },
    /// Repeat the configured experiment sequence.
    Simulate,
    /// Continuous alternating-reload operation over one or more seeds.
    Continuous {
        #[arg(long)]
        minutes: Option<f64>,
        /// Availability level a run must stay above.
        #[arg(long, default_value_t = 115)]
        min_atoms: usize,
    },
    /// Loading and loss statistics from a records file.
    Analyze {
        #[arg(long)]
        records: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AodAction {
    /// Tones, mask and amplitude feedback for the Rb sites of a geometry.
    Plan {
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// JSON calibration object `{um_per_mhz, offset_um, min_spacing_mhz}`.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
