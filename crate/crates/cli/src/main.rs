//! `xdisp`: generate demonstrations, train goal predictors, sample
//! predictions, run rollouts and evaluate.

mod commands;
mod common;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use commands::{eval, gen_data, predict, rollout, train};
use config::{CliError, Paths};

#[derive(Parser, Debug)]
#[command(
    name = "xdisp",
    version,
    about = "Cross-displacement goal prediction for cloth hanging"
)]
struct Cli {
    /// Base directory for relative paths.
    #[arg(long, global = true, env = "XDISP_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    /// `key = value` file with command settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collect expert demonstrations.
    GenData(gen_data::GenDataArgs),
    /// Train a model on a dataset.
    Train(train::TrainArgs),
    /// Sample goal clouds for a scene.
    Predict(predict::PredictArgs),
    /// Run one episode with the expert or a model.
    Rollout(rollout::RolloutArgs),
    /// Success rates and prediction errors.
    Eval(eval::EvalArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let paths = Paths {
        root: cli.output_root,
    };
    let file = cli.config.as_deref();
    match cli.command {
        Command::GenData(a) => gen_data::run(a, file, &paths),
        Command::Train(a) => train::run(a, file, &paths),
        Command::Predict(a) => predict::run(a, file, &paths),
        Command::Rollout(a) => rollout::run(a, file, &paths),
        Command::Eval(a) => eval::run(a, file, &paths),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
