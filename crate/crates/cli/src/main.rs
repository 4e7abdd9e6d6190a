mod commands;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use context::{CliError, Context};

#[derive(Parser, Debug)]
#[command(name = "conspin", version, about = "Experiments on conservative spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; repeat for several. Defaults to the config's `seeds`, else 0.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "CONSPIN_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for scan points.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Constant override, `constants.NAME=VALUE`.
    #[arg(long = "set", global = true, value_name = "constants.NAME=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Spectral-gap estimates over an (n, s) grid.
    GapScan,
    /// Log-Sobolev and spectral-gap bounds for the conditioned measure.
    LsiReport,
    /// Solve the tilt fixed point of an interacting system.
    TiltSolve,
    /// Concentration transfer from the product measure.
    TransferCalc,
    /// Monte-Carlo tails of a Gaussian chaos against the bound.
    ChaosTail,
    /// Density-ratio norms across system sizes.
    RatioScan,
    /// Log-concave facts for the site (and optionally the corpus).
    FactsSuite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GapScan => "gap-scan",
            Command::LsiReport => "lsi-report",
            Command::TiltSolve => "tilt-solve",
            Command::TransferCalc => "transfer-calc",
            Command::ChaosTail => "chaos-tail",
            Command::RatioScan => "ratio-scan",
            Command::FactsSuite => "facts-suite",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut ctx = Context::new(cli.command.name(), &config, cli.seeds, cli.out, cli.workers, &cli.sets)?;
    match cli.command {
        Command::GapScan => commands::gap_scan(&mut ctx)?,
        Command::LsiReport => commands::lsi_report(&mut ctx)?,
        Command::TiltSolve => commands::tilt_solve(&mut ctx)?,
        Command::TransferCalc => commands::transfer_calc(&mut ctx)?,
        Command::ChaosTail => commands::chaos_tail(&mut ctx)?,
        Command::RatioScan => commands::ratio_scan(&mut ctx)?,
        Command::FactsSuite => commands::facts_suite(&mut ctx)?,
    }
    ctx.finish()
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
