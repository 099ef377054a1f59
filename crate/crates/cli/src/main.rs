use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rai_cli::commands::{self, DiagnoseArgs, SelectArgs, SimulateArgs};

/// Feature selection by revisiting alpha-investing.
#[derive(Debug, Parser)]
#[command(name = "rai", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select features (and optionally interactions) for a response column
    Select(SelectArgs),
    /// Run a replicated simulation and write results
    Simulate(SimulateArgs),
    /// Compare the selection with stepwise and best-subset references
    Diagnose(DiagnoseArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Select(a) => commands::select(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Diagnose(a) => commands::diagnose(a),
    };
    match result {
        Ok(out) => {
            // a closed pipe is not worth a panic
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
