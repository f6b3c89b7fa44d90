use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singlewell_core::cli::{run_kwc, run_minimize_sweep, run_recovery, run_unfold, Invocation};

#[derive(Parser)]
#[command(name = "singlewell", version, about = "Single-well Modica-Mortola and KWC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the penalized energy over an eps schedule.
    MinimizeSweep(Common),
    /// Build recovery fields for a set-valued limit and check the limsup bound.
    Recovery(Common),
    /// Alternating KWC minimization.
    Kwc(Common),
    /// Arc-length unfolding of a field.
    Unfold(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Graph sampling resolution; overrides the config.
    #[arg(long)]
    resolution: Option<f64>,
}

impl From<Common> for Invocation {
    fn from(c: Common) -> Self {
        Invocation { config: c.config, out: c.out, resolution: c.resolution }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MinimizeSweep(c) => run_minimize_sweep(&c.into()),
        Command::Recovery(c) => run_recovery(&c.into()),
        Command::Kwc(c) => run_kwc(&c.into()),
        Command::Unfold(c) => run_unfold(&c.into()),
    };
    match result {
        Ok(report) => {
            for path in &report.written {
                println!("wrote {}", path.display());
            }
            match report.failure {
                Some(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
