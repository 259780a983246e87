use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;
mod settings;

use settings::{CliError, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "wavegp",
    version,
    about = "Wave-equation Gaussian process kernels, kriging and weak-form verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate a kernel over pairs of points
    KernelEval(RunArgs),
    /// Kernel matrix over a point list as CSV
    Gram(RunArgs),
    /// Tabulate kw, kv_wave and ku_wave against a reference point over a space-time grid
    WaveCov(RunArgs),
    /// Fit to CSV observations and tabulate posterior mean and std on a grid
    Krige(RunArgs),
    /// Weak-form residuals of a kernel under a differential operator (JSON)
    Verify(RunArgs),
    /// Monte Carlo statistics of pathwise weak-form residuals (JSON)
    McVerify(RunArgs),
    /// Draw one wave-field sample path as CSV
    Sample(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Configuration file with one key=value per line; may be repeated
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Exit with status 4 when any residual check fails
    #[arg(long)]
    strict: bool,
    /// Settings as key=value; these override config files
    settings: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::KernelEval(a) => ("kernel-eval", a),
        Command::Gram(a) => ("gram", a),
        Command::WaveCov(a) => ("wave-cov", a),
        Command::Krige(a) => ("krige", a),
        Command::Verify(a) => ("verify", a),
        Command::McVerify(a) => ("mc-verify", a),
        Command::Sample(a) => ("sample", a),
    };
    match run(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e);
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let settings = Settings::load(name, &args.config, &args.settings)?;
    let threads = settings.threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let artifact = pool.install(|| commands::dispatch(name, &settings))?;
    output::write(settings.out(), &artifact.body)?;
    if args.strict && !artifact.passed {
        return Err(CliError::Verification("at least one residual check failed".into()));
    }
    Ok(())
}
