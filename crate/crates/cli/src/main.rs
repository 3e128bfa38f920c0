//! `maxvi`: experiment driver for max-stable variational inference.
//!
//! Four subcommands share one config-file format and the same flags:
//!
//! ```text
//! maxvi simulate --config truth.toml            # draw a dataset to disk
//! maxvi fit      --config fit.toml --seed 9     # variational fit
//! maxvi mle      --config fit.toml              # exact-likelihood baseline
//! maxvi sweep    --config study.toml --threads 4
//! ```
//!
//! Exit codes: 0 success, 2 config error, 3 every replication of a sweep
//! failed, 1 anything else.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{exit_code, load_plan, CliError, Command, Overrides};

#[derive(Parser)]
#[command(name = "maxvi", version, about = "Max-stable process experiments", propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw synthetic data and write dataset files
    Simulate(RunArgs),
    /// Variational fit of a dataset on disk
    Fit(RunArgs),
    /// Exact maximum-likelihood baseline
    Mle(RunArgs),
    /// Replication study comparing estimators
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Override the seed from the config file
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Output directory (default: from config, else the current directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Mle(a) => (Command::Mle, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail(&CliError::Config(format!("cannot set thread count: {e}")));
        }
    }
    let overrides = Overrides {
        command,
        seed: args.seed,
        out: args.out.clone(),
    };
    let plan = match load_plan(&args.config, &overrides) {
        Ok(plan) => plan,
        Err(e) => return fail(&e),
    };
    for line in &plan.defaults_applied {
        eprintln!("maxvi: default applied: {line}");
    }
    match runner::run(&plan) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("maxvi: {e}");
    ExitCode::from(exit_code(e) as u8)
}
