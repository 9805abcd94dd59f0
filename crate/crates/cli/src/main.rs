mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] apfix_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("toy regression: {0}")]
    Regression(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Usage(_) => 2,
            CliError::Regression(_) => 3,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let ctx = Context {
        no_timestamp: cli.no_timestamp,
    };
    match &cli.command {
        Command::Evaluate(a) => commands::evaluate(a, &ctx),
        Command::Sweep(a) => commands::sweep_cmd(a, &ctx),
        Command::Game(a) => commands::game(a, &ctx),
        Command::Subset(a) => commands::subset(a, &ctx),
        Command::Calibrate(a) => commands::calibrate(a, &ctx),
        Command::Apply(a) => commands::apply(a, &ctx),
        Command::ScoreDist(a) => commands::score_dist(a, &ctx),
        Command::Toy(a) => commands::toy_cmd(a, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
