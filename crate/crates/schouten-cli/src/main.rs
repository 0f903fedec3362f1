//! Experiment runner for the prescribed-curvature conformal solver.
//!
//! Exit codes: 0 success (or converged run), 1 failed check or step
//! failure, 2 blow-up detected (a result, not a bug), 64 bad usage or
//! config, 70 internal error.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(name = "schouten", version, about = "Prescribed Schouten-curvature continuation runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the structural-condition suite on the configured curvature
    /// function family.
    VerifySymfunc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the curvature assembly against the independent
    /// finite-difference Riemann oracle at two resolutions.
    CurvatureCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the homotopy continuation path and dump history and fields.
    Continue {
        #[arg(long)]
        config: PathBuf,
    },
    /// Analyze a run directory (or a bare field CSV with --config) for
    /// blow-up structure.
    BlowupAnalyze {
        /// Run directory containing run_report.json, or a field CSV.
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Depth of u below which the located point counts as blow-up.
        #[arg(long)]
        depth_threshold: Option<f64>,
    },
    /// Evenly reflect a field across the chart's boundary faces.
    Double {
        field: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        neumann_tol: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

const EX_USAGE: u8 = 64;
const EX_SOFTWARE: u8 = 70;

fn load(path: &PathBuf) -> Result<Config, ExitCode> {
    Config::from_path(path).map_err(|e| {
        eprintln!("config error: {e:#}");
        ExitCode::from(EX_USAGE)
    })
}

fn run(cli: Cli) -> Result<i32, ExitCode> {
    let result = match &cli.cmd {
        Cmd::VerifySymfunc { config } => commands::verify_symfunc(&load(config)?),
        Cmd::CurvatureCheck { config } => commands::curvature_check(&load(config)?),
        Cmd::Continue { config } => commands::continue_run(&load(config)?),
        Cmd::BlowupAnalyze { input, config, depth_threshold } => {
            commands::blowup_analyze(input, config.as_deref(), *depth_threshold)
        }
        Cmd::Double { field, config, neumann_tol, output } => {
            commands::double_field_cmd(field, &load(config)?, *neumann_tol, output.as_deref())
        }
    };
    result.map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EX_SOFTWARE)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(code) => code,
    }
}
