use std::process::ExitCode;

use clap::Parser;
use hintdesk_server::cli::{run_offline, Cli, Command};
use hintdesk_server::{serve, Config};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve { config } => match Config::load(config) {
            Ok(config) => serve(config).await,
            Err(e) => Err(e.to_string()),
        },
        offline => run_offline(offline).map(|out| print!("{out}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
