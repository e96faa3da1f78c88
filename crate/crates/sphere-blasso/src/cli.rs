//! Argument parsing and dispatch. Exit codes: 0 when every check passed,
//! 1 on a failed check or computation, 2 on input errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::{self, Outcome};
use crate::config::RunConfig;
use crate::output;
use crate::repro;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "sphere-blasso", version, about = "Sparse-measure training of shallow ReLU networks on the sphere")]
pub struct Cli {
    /// Output directory, overriding `output_dir` of the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and certify; writes solution.json, and for planar data
    /// certificate.csv and solution.svg.
    Solve { config: PathBuf },
    /// Check localization, non-degeneracy and the sufficient conditions of a
    /// stored solution; writes certify.json.
    Certify { config: PathBuf, solution: PathBuf },
    /// Enumerate the strata of the data arrangement; writes regions.json.
    Regions { config: PathBuf },
    /// Warm-started regularization path; writes atoms_vs_lambda.csv/.svg.
    SweepLambda { config: PathBuf },
    /// Deviation of the solution under growing label noise; writes
    /// stability.csv and two charts.
    Stability { config: PathBuf },
    /// Run the built-in data sets against the reference results and print a
    /// pass/fail table; also written to repro.txt.
    PaperRepro {
        /// Optional configuration supplying solver settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf)
}

fn report(outcome: &Outcome) -> i32 {
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if outcome.passed {
        0
    } else {
        1
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Solve { config } => {
            let cfg = RunConfig::load(config)?;
            Ok(report(&commands::solve_cmd(&cfg, &output_dir(&cfg, out))?.0))
        }
        Command::Certify { config, solution } => {
            let cfg = RunConfig::load(config)?;
            Ok(report(&commands::certify_cmd(&cfg, solution, &output_dir(&cfg, out))?.0))
        }
        Command::Regions { config } => {
            let cfg = RunConfig::load(config)?;
            Ok(report(&commands::regions_cmd(&cfg, &output_dir(&cfg, out))?.0))
        }
        Command::SweepLambda { config } => {
            let cfg = RunConfig::load(config)?;
            Ok(report(&commands::sweep_cmd(&cfg, &output_dir(&cfg, out))?.0))
        }
        Command::Stability { config } => {
            let cfg = RunConfig::load(config)?;
            Ok(report(&commands::stability_cmd(&cfg, &output_dir(&cfg, out))?.0))
        }
        Command::PaperRepro { config } => {
            let (solver, dir) = match config {
                Some(path) => {
                    let cfg = RunConfig::load(path)?;
                    (cfg.solver_config()?, output_dir(&cfg, out))
                }
                None => (Default::default(), out.map_or_else(|| PathBuf::from("out"), Path::to_path_buf)),
            };
            let threads = commands::thread_count()?;
            let criteria = repro::run(&solver, threads)?;
            let table: String = criteria.iter().map(|c| c.line() + "\n").collect();
            print!("{table}");
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
            output::write_text(&dir.join("repro.txt"), &table)?;
            Ok(if criteria.iter().all(|c| c.passed) { 0 } else { 1 })
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
