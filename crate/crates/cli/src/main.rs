mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Opts;
use error::CliError;

/// Temporal Gaussian copula imputation for multivariate time series.
#[derive(Parser, Debug)]
#[command(name = "tgc", version)]
struct Cli {
    /// Flat TOML (or JSON run record) whose keys mirror the flag names
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit marginals and the latent correlation, write a model bundle
    Fit(Opts),
    /// Fill the missing cells of a CSV with a fitted model
    Impute(Opts),
    /// Run the masking benchmark on a CSV or on synthetic data
    Benchmark(Opts),
    /// Generate a synthetic dataset with a known latent correlation
    Synth(Opts),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags, keys) = match cli.command {
        Command::Fit(o) => ("fit", o, commands::FIT_KEYS),
        Command::Impute(o) => ("impute", o, commands::IMPUTE_KEYS),
        Command::Benchmark(o) => ("benchmark", o, commands::BENCHMARK_KEYS),
        Command::Synth(o) => ("synth", o, commands::SYNTH_KEYS),
    };
    flags.check_allowed(name, keys)?;
    let file = match &cli.config {
        Some(path) => Opts::load(path)?.restrict(keys),
        None => Opts::default(),
    };
    let opts = flags.over(file);

    if let Some(n) = opts.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(format!("cannot start {n} threads: {e}")))?;
    }

    let staged = match name {
        "fit" => commands::fit(opts)?,
        "impute" => commands::impute(opts)?,
        "synth" => commands::synth(opts)?,
        _ => {
            let (staged, summary) = commands::benchmark(opts)?;
            print!("{summary}");
            staged
        }
    };
    let written: Vec<String> = staged.paths().map(|p| p.display().to_string()).collect();
    staged.commit()?;
    for p in written {
        log::info!("wrote {p}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
