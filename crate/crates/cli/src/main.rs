use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod expr;
mod run;

/// Coupled membrane, mould and temperature contact solver.
#[derive(Parser)]
#[command(name = "thermoqvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stationary problem and write fields, report and scorecard.
    SolveElliptic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write legacy VTK files.
        #[arg(long)]
        vtk: bool,
    },
    /// Run implicit time stepping and write every step.
    SolveQuasistatic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        vtk: bool,
    },
    /// Recompute the scorecard of a saved run; exit 1 if an invariant fails.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::SolveElliptic { config, out, vtk } => run::cmd_solve_elliptic(config, out.as_deref(), *vtk),
        Command::SolveQuasistatic { config, out, vtk } => run::cmd_solve_quasistatic(config, out.as_deref(), *vtk),
        Command::Verify { input } => run::cmd_verify(input),
    };
    match result {
        Ok(msg) => {
            print!("{msg}");
            if !msg.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
