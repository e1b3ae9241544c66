//! HTTP service and command-line tools for hintdesk.

pub mod app;
pub mod auth;
pub mod cli;
pub mod config;
pub mod error;
pub mod notify;

use std::sync::Arc;

use hintdesk_core::{HelpDesk, SystemClock, UuidIds};
use hintdesk_pipeline::{
    CompletionProvider, HintPipeline, MockProvider, ProcessSandbox, ProviderKind, RemoteProvider,
    Templates,
};
use tokio::net::TcpListener;
use tracing::{info, warn};

pub use app::{router, AppState};
pub use config::Config;

/// Builds the generation pipeline the config describes.
pub fn build_pipeline(config: &Config) -> Result<HintPipeline, String> {
    let provider: Arc<dyn CompletionProvider> = match config.provider.kind {
        ProviderKind::Mock => Arc::new(MockProvider::new(config.provider.seed)),
        ProviderKind::Remote => {
            Arc::new(RemoteProvider::from_config(&config.provider).map_err(|e| e.to_string())?)
        }
    };
    let templates = match &config.templates_dir {
        Some(dir) => Templates::from_dir(dir)
            .map_err(|e| format!("cannot read templates in {}: {e}", dir.display()))?,
        None => Templates::default(),
    };
    Ok(HintPipeline::new(
        provider,
        Arc::new(ProcessSandbox::new(config.sandbox.command.clone())),
    )
    .with_templates(templates)
    .with_config(config.provider.clone())
    .with_limits(config.sandbox.limits.clone()))
}

/// Opens the log, restores state and wires notifications.
pub fn build_state(config: &Config) -> Result<AppState, String> {
    let desk = HelpDesk::open(
        &config.log_path,
        config.desk_config(),
        Arc::new(SystemClock),
        Arc::new(UuidIds),
    )
    .map_err(|e| format!("cannot open {}: {e}", config.log_path.display()))?
    .with_tasks(config.tasks.clone());
    let desk = Arc::new(desk);
    let interrupted = desk.recover_interrupted().map_err(|e| e.to_string())?;
    if !interrupted.is_empty() {
        warn!(
            count = interrupted.len(),
            "failed requests interrupted by the last shutdown; quota refunded"
        );
    }
    let notifier = notify::build_notifier(&config.notify)?;
    let (jobs, _worker) = notify::start(&desk, notifier, &config.notify);
    Ok(AppState {
        desk,
        pipeline: Arc::new(build_pipeline(config)?),
        tokens: Arc::new(auth::Tokens::new(&config.tokens)?),
        jobs,
    })
}

/// Serves until interrupted.
pub async fn serve(config: Config) -> Result<(), String> {
    let state = build_state(&config)?;
    let listener = TcpListener::bind(&config.listen)
        .await
        .map_err(|e| format!("cannot listen on {}: {e}", config.listen))?;
    info!(addr = %listener.local_addr().map_err(|e| e.to_string())?, log = %config.log_path.display(), "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}
