use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ngdrate_cli::{commands, sweep, CliResult};
use ngdrate_core::EstimatorKind;

/// Noisy gradient descent versus linear estimators on teacher-student
/// regression.
#[derive(Parser)]
#[command(name = "ngdrate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config and print its canonical form with resolved settings.
    Check { config: PathBuf },
    /// Write the teacher network described by a config.
    Teacher {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the dataset of one sweep cell as CSV.
    Data {
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the noisy gradient descent chain on a dataset.
    Train {
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune and fit one linear baseline on a dataset.
    Fit {
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or resume) the sweep over sample sizes and replicates.
    /// Worker count is read from NGDRATE_WORKERS.
    Sweep { config: PathBuf },
    /// Rate table, theory exponents and plot files from a results file.
    Report {
        results: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Approximate a Gaussian bump by sigmoid ridge functions.
    Lemma {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Check { config } => commands::check(&config),
        Command::Teacher { config, out } => commands::teacher(&config, out.as_deref()),
        Command::Data { config, n, replicate, out } => commands::data(&config, n, replicate, out.as_deref()),
        Command::Train { config, data, replicate, out } => commands::train(&config, &data, replicate, &out),
        Command::Fit {
            config,
            data,
            estimator,
            replicate,
            out,
        } => commands::fit(&config, &data, estimator, replicate, out.as_deref()),
        Command::Sweep { config } => commands::sweep(&config, sweep::workers_from_env()?),
        Command::Report { results, config, plots } => commands::report(&results, config.as_deref(), plots.as_deref()),
        Command::Lemma { config, out } => commands::lemma(&config, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
