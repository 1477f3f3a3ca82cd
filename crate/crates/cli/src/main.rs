mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{PartialCoverage, Sink};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_COVERAGE: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<PartialCoverage>().is_some() {
        return EXIT_COVERAGE;
    }
    match err.downcast_ref::<minipatch::Error>() {
        Some(e) if e.is_coverage_failure() => EXIT_COVERAGE,
        Some(e) if e.is_data_error() => EXIT_DATA,
        Some(
            minipatch::Error::InvalidSpec(_)
            | minipatch::Error::InvalidSize(_)
            | minipatch::Error::TaskMismatch { .. }
            | minipatch::Error::TooLarge(_)
            | minipatch::Error::NoSampler,
        ) => EXIT_USAGE,
        // Files the CLI itself could not create.
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let sink = Sink {
        format: cli.format,
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &sink),
        Command::Infer(a) => commands::infer(a, &sink),
        Command::Predict(a) => commands::predict(a, &sink),
        Command::Oracle(a) => commands::oracle(a, &sink),
        Command::Bench(b) => commands::bench(b, &sink),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.threads {
        Some(0) => Err(anyhow::Error::new(minipatch::Error::InvalidSize("--threads must be positive".into()))),
        Some(t) => minipatch::par::with_threads(t, || run(&cli)),
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
