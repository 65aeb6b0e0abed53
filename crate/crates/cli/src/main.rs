//! `contact-rom`: run the reduced-order contact pipeline stage by stage.

mod compare;
mod config;
mod error;
mod stages;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contact_rom::CouplingMethod;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "contact-rom", version, about = "Substructured operator inference with reduced contact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Training runs, snapshots and the full-order contact reference.
    SimulateFom(RunArgs),
    /// Infer the reduced model from stored snapshots.
    Infer(RunArgs),
    /// Reduced contact run from the stored model, with error curves.
    SimulateRom(RunArgs),
    /// All three stages in order.
    Pipeline(RunArgs),
    /// Tabulate error statistics across finished runs.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Directory for comparison.csv and comparison.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out` from the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    /// Recorded in the resolved config; all stages are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    FullLsq,
    ReducedLsq,
    StaticModes,
}

impl From<CouplingArg> for CouplingMethod {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::FullLsq => CouplingMethod::FullLsq,
            CouplingArg::ReducedLsq => CouplingMethod::ReducedLsq,
            CouplingArg::StaticModes => CouplingMethod::StaticModes,
        }
    }
}

fn run_stage(args: &RunArgs, stage: fn(&config::RunConfig) -> Result<(), CliError>) -> Result<(), CliError> {
    let cfg = config::load(&args.config, args.out.as_deref(), args.coupling.map(Into::into), args.seed)?;
    stage(&cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SimulateFom(a) => run_stage(&a, stages::simulate_fom),
        Command::Infer(a) => run_stage(&a, stages::infer),
        Command::SimulateRom(a) => run_stage(&a, stages::simulate_rom),
        Command::Pipeline(a) => run_stage(&a, stages::pipeline),
        Command::Compare { dirs, out } => {
            let rows = compare::compare(&dirs)?;
            let table = compare::to_table(&rows);
            print!("{table}");
            if let Some(out) = out {
                fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
                let csv = out.join("comparison.csv");
                fs::write(&csv, compare::to_csv(&rows)).map_err(|e| CliError::io(&csv, e))?;
                let txt = out.join("comparison.txt");
                fs::write(&txt, table).map_err(|e| CliError::io(&txt, e))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
