use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdm::config::{cmd_bench, cmd_solve, cmd_verify, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "pdm",
    about = "Primal-dual solver for consensus problems over changing topologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to a JSON experiment configuration.
    config: PathBuf,
    /// Write the per-iteration trace CSV here (overrides the config).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the stochastic seeds (schedule, random graph, bench).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress stdout; exit codes still report the outcome.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and report the final state.
    Solve(Common),
    /// Run independent health checks and print a pass/fail table.
    Verify(Common),
    /// Sweep problem sizes and report per-phase timings.
    Bench(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, i32> {
    match ExperimentConfig::from_path(&common.config) {
        Ok(mut config) => {
            if let Some(path) = &common.trace {
                config.outputs.trace = Some(path.display().to_string());
            }
            if let Some(seed) = common.seed {
                config.apply_seed(seed);
            }
            Ok(config)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(common) => match load(common) {
            Ok(config) => cmd_solve(&config, common.quiet),
            Err(code) => code,
        },
        Command::Verify(common) => match load(common) {
            Ok(config) => cmd_verify(&config, common.quiet),
            Err(code) => code,
        },
        Command::Bench(common) => match load(common) {
            Ok(config) => cmd_bench(&config, common.quiet),
            Err(code) => code,
        },
    };
    ExitCode::from(code as u8)
}
