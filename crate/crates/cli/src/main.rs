use std::path::PathBuf;
use std::process::ExitCode;

use bayeskern_cli::{run_command, CliError, Command, LoadedConfig, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bayeskern", version, about = "Bayesian kernel regression, smoothing and filtering")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Weight posterior (RVM, Q-GP) or dual coefficients (GP) with the log evidence.
    Fit(Common),
    /// Predictive mean and variance at the configured points.
    Predict(Common),
    /// Smoothed values at the training inputs; covariance goes to a sidecar.
    Smooth(Common),
    /// Prior or posterior function draws, one column per draw.
    Sample(Common),
    /// Hyperparameter learning: optimizer trace or hyperposterior draws.
    Learn(Common),
    /// Relevance learning of the RVM weight precisions.
    Relevance(Common),
    /// Kalman filter and backward smoother tracks.
    Kalman(Common),
    /// Per-point differences between two methods.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output CSV; stdout when absent (sidecars are then skipped).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jitter: Option<f64>,
}

fn execute(command: Command, args: Common) -> Result<(), CliError> {
    let loaded = LoadedConfig::from_file(&args.config)?;
    let overrides = Overrides {
        data: args.data,
        seed: args.seed,
        jitter: args.jitter,
    };
    let table = run_command(command, &loaded, &overrides)?;
    match &args.out {
        Some(path) => table.write_files(path),
        None => table
            .write_to(std::io::stdout().lock())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Predict(a) => (Command::Predict, a),
        Sub::Smooth(a) => (Command::Smooth, a),
        Sub::Sample(a) => (Command::Sample, a),
        Sub::Learn(a) => (Command::Learn, a),
        Sub::Relevance(a) => (Command::Relevance, a),
        Sub::Kalman(a) => (Command::Kalman, a),
        Sub::Compare(a) => (Command::Compare, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
