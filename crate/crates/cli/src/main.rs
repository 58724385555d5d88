use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lrb_cli::{run, CliError, Command, RunOptions, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Simulate,
    Price,
    Option,
    Verify,
}

/// Lévy random bridge scenarios.
///
/// Exit codes: 0 success, 1 config error, 2 numeric error, 3 check failure.
#[derive(Debug, Parser)]
#[command(name = "lrb", version)]
struct Args {
    #[arg(value_enum)]
    command: CommandArg,

    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for path generation.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,

    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|source| CliError::Input { path: args.config.display().to_string(), source })?;
    let config = ScenarioConfig::parse(&text)?;
    let command = match args.command {
        CommandArg::Simulate => Command::Simulate,
        CommandArg::Price => Command::Price,
        CommandArg::Option => Command::Option,
        CommandArg::Verify => Command::Verify,
    };
    let opts = RunOptions { workers: args.workers.max(1), seed: args.seed };
    // Validate before creating the output file, so a bad config leaves no file.
    config.scenario()?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    run(command, &config, opts, &mut out)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // Usage errors share the config-error code; 2 is reserved for numeric failures.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
