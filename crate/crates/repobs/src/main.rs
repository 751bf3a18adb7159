use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use repobs::commands::{self, Overrides};

/// Repeated-observation classification: bounds, simulation, transform
/// optimization, and exponent fitting driven by a JSON run config.
#[derive(Parser)]
#[command(name = "repobs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (performance only, never results); defaults to
    /// REPOBS_WORKERS or the rayon default.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials-per-class override.
    #[arg(long)]
    trials: Option<usize>,
    /// t-grid override ("a:b:step").
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the selected bound families on the t-grid.
    Bounds(RunArgs),
    /// Monte Carlo error curve, bound audit, and exponent fit.
    Simulate(RunArgs),
    /// Run the transform optimizers and score them with σ²(A).
    Optimize(RunArgs),
    /// Fit the decay exponent of an existing curve CSV.
    Exponent {
        /// Curve CSV produced by `simulate`.
        #[arg(long)]
        curve: PathBuf,
        /// Output directory (defaults to the curve's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    match cli.command {
        Command::Bounds(args) => {
            let ctx = commands::prepare(&args.config, &overrides(&args))?;
            commands::cmd_bounds(&ctx)
        }
        Command::Simulate(args) => {
            let ctx = commands::prepare(&args.config, &overrides(&args))?;
            commands::cmd_simulate(&ctx)
        }
        Command::Optimize(args) => {
            let ctx = commands::prepare(&args.config, &overrides(&args))?;
            commands::cmd_optimize(&ctx)
        }
        Command::Exponent { curve, out } => {
            let out_dir = out.unwrap_or_else(|| {
                curve.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
            });
            commands::cmd_exponent(&curve, &out_dir)
        }
    }
}

fn overrides(args: &RunArgs) -> Overrides {
    Overrides {
        seed: args.seed,
        trials: args.trials,
        t_grid: args.t_grid.clone(),
        out_dir: args.out.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let workers = cli
        .workers
        .or_else(|| std::env::var("REPOBS_WORKERS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("repobs: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("repobs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
