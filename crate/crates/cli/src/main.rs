use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use spinbus::cli_io::{self, RunConfig, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Spectrum,
    CouplerCharacter,
    FluxPropagation,
    Susceptibility,
    JeffCompare,
    Noise,
    HierarchyBench,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Subcommand::Spectrum,
            Command::CouplerCharacter => Subcommand::CouplerCharacter,
            Command::FluxPropagation => Subcommand::FluxPropagation,
            Command::Susceptibility => Subcommand::Susceptibility,
            Command::JeffCompare => Subcommand::JeffCompare,
            Command::Noise => Subcommand::Noise,
            Command::HierarchyBench => Subcommand::HierarchyBench,
        }
    }
}

/// Spin-chain bus simulator.
#[derive(Debug, Parser)]
#[command(name = "spinbus", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and metadata.json.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to SPINBUS_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> spinbus::Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    cli_io::configure_threads(args.threads)?;
    let bundle = cli_io::run(args.command.into(), &cfg, args.seed)?;
    cli_io::write_bundle(&bundle, &args.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinbus {}: {e}", Subcommand::from(args.command));
            cli_io::write_failure(&args.out, Some(args.command.into()), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
