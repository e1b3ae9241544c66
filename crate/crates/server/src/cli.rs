//! The `hintdesk` command line.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hintdesk_analytics::{analyze, emit_report, render, ReportFormat};
use hintdesk_core::{log, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "hintdesk",
    version,
    about = "AI hints with instructor escalation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute deployment metrics from an event log.
    Analyze {
        log: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// text or json.
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
    /// Check that a log is intact and replays cleanly.
    ReplayCheck { log: PathBuf },
}

/// Runs an offline command, returning what to print.
pub fn run_offline(command: &Command) -> Result<String, String> {
    match command {
        Command::Serve { .. } => Err("serve is not an offline command".into()),
        Command::Analyze {
            log: path,
            report,
            format,
        } => {
            let records = log::read_log(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let result = analyze(&records).map_err(|e| format!("{}: {e}", path.display()))?;
            match report {
                Some(out) => {
                    emit_report(&result, *format, out)
                        .map_err(|e| format!("{}: {e}", out.display()))?;
                    Ok(format!("wrote {}\n", out.display()))
                }
                None => Ok(render(&result, *format)),
            }
        }
        Command::ReplayCheck { log: path } => {
            let records = log::read_log(path).map_err(|e| format!("{}: {e}", path.display()))?;
            log::check_integrity(&records).map_err(|e| format!("{}: {e}", path.display()))?;
            let state =
                ServiceState::replay(&records).map_err(|e| format!("{}: {e}", path.display()))?;
            let again = ServiceState::replay(&records).map_err(|e| e.to_string())?;
            if state.canonical_bytes() != again.canonical_bytes() {
                return Err("replay is not deterministic".into());
            }
            Ok(format!(
                "ok: {} events, {} requests, {} hints, {} escalations\n",
                records.len(),
                state.requests().count(),
                state.hints().count(),
                state.escalations().count()
            ))
        }
    }
}
