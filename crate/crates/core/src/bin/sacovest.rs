use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sacovest::experiment::{self, CliOverrides, Command};
use sacovest::Error;

#[derive(Parser, Debug)]
#[command(name = "sacovest", version, about = "Batch-means inference for nonsmooth stochastic approximation")]
struct Cli {
    /// run, rate, coverage, diagnose or list-problems
    command: String,
    /// JSON experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config_error() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sacovest: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let command: Command = cli.command.parse()?;
    if command == Command::ListProblems {
        print!("{}", experiment::canonical_json(&experiment::list_problems()?));
        return Ok(());
    }
    let path = cli
        .config
        .ok_or_else(|| Error::Validation(format!("command {command} requires --config <file>")))?;
    let overrides = CliOverrides {
        command: Some(command),
        seed: cli.seed,
        out_dir: cli.out_dir,
        threads: cli.threads,
        n: cli.n,
        reps: cli.reps,
    };
    let config = experiment::load_config(&path, &overrides)?;
    let reports = experiment::execute(&config)?;
    for written in experiment::emit_reports(&reports, &config)? {
        println!("{}", written.display());
    }
    Ok(())
}
