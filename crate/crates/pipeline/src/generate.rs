//! Hint generation: stage routing, retries and the overall time budget.

use std::sync::Arc;
use std::time::{Duration, Instant};

use hintdesk_core::{HelpDesk, HelpRequest, Hint, HintType, RequestId, RequestState};
use thiserror::Error;
use tracing::{debug, warn};

use crate::prompt::{PromptBundle, PromptError, Stage, Templates};
use crate::provider::{CompletionProvider, ProviderConfig, ProviderError};
use crate::sandbox::{CodeExecutor, ExecLimits, ExecutionResult};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("request is {}, not generating", .0.as_str())]
    NotGenerating(RequestState),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{stage} failed after {attempts} attempt(s): {source}")]
    Provider {
        stage: Stage,
        attempts: u32,
        #[source]
        source: ProviderError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedHint {
    pub text: String,
    pub latency: Duration,
    /// The sandbox run, for debugging hints.
    pub execution: Option<ExecutionResult>,
}

/// Everything needed to turn a request into hint text.
#[derive(Clone)]
pub struct HintPipeline {
    provider: Arc<dyn CompletionProvider>,
    executor: Arc<dyn CodeExecutor>,
    templates: Templates,
    config: ProviderConfig,
    limits: ExecLimits,
}

impl HintPipeline {
    pub fn new(provider: Arc<dyn CompletionProvider>, executor: Arc<dyn CodeExecutor>) -> Self {
        Self {
            provider,
            executor,
            templates: Templates::default(),
            config: ProviderConfig::default(),
            limits: ExecLimits::default(),
        }
    }

    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_config(mut self, config: ProviderConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_limits(mut self, limits: ExecLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Produces hint text for a request in `Generating`.
    ///
    /// Debugging runs the code, asks for a corrected program, then asks for
    /// a one-bug hint. Planning and optimization take a single call.
    pub async fn generate(
        &self,
        request: &HelpRequest,
        task_description: &str,
    ) -> Result<GeneratedHint, GenerationError> {
        if request.state != RequestState::Generating {
            return Err(GenerationError::NotGenerating(request.state));
        }
        let started = Instant::now();
        let deadline = started + self.config.timeout;
        let mut bundle = PromptBundle {
            stage: Stage::PlanGeneration,
            task_description: task_description.to_owned(),
            student_code: request.code_snapshot.clone(),
            student_comment: request.student_comment.clone(),
            execution_output: None,
            candidate_fix: None,
        };
        let (text, execution) = match request.hint_type {
            HintType::Planning => (self.stage(&bundle, deadline).await?, None),
            HintType::Optimization => {
                bundle.stage = Stage::OptimizationGeneration;
                (self.stage(&bundle, deadline).await?, None)
            }
            HintType::Debugging => {
                let run = self
                    .executor
                    .execute(&request.code_snapshot, &self.limits)
                    .await;
                debug!(status = ?run.exit_status, "sandbox finished");
                bundle.stage = Stage::FixGeneration;
                bundle.execution_output = run.describe();
                let fix = self.stage(&bundle, deadline).await?;
                bundle.stage = Stage::HintGeneration;
                bundle.candidate_fix = Some(fix);
                (self.stage(&bundle, deadline).await?, Some(run))
            }
        };
        Ok(GeneratedHint {
            text: text.trim().to_owned(),
            latency: started.elapsed(),
            execution,
        })
    }

    async fn stage(
        &self,
        bundle: &PromptBundle,
        deadline: Instant,
    ) -> Result<String, GenerationError> {
        let prompt = self.templates.render(bundle)?;
        let stage = bundle.stage;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let remaining = deadline.saturating_duration_since(Instant::now());
            let outcome = if remaining.is_zero() {
                Err(ProviderError::Timeout(self.config.timeout))
            } else {
                tokio::time::timeout(remaining, self.provider.complete(&prompt))
                    .await
                    .unwrap_or(Err(ProviderError::Timeout(self.config.timeout)))
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(source) => {
                    let out_of_time = matches!(source, ProviderError::Timeout(_));
                    if out_of_time || attempts > self.config.max_retries {
                        return Err(GenerationError::Provider {
                            stage,
                            attempts,
                            source,
                        });
                    }
                    warn!(%stage, attempts, error = %source, "retrying provider call");
                }
            }
        }
    }
}

/// Moves a request through generation on the desk: start, generate, then
/// deliver or fail. Returns the hint when one was delivered.
pub async fn fulfil(
    desk: &HelpDesk,
    pipeline: &HintPipeline,
    request_id: &RequestId,
) -> hintdesk_core::Result<Option<Hint>> {
    let request = match desk.read(|s| s.request(request_id).cloned()) {
        Some(r) if r.state == RequestState::Created => desk.start_generation(request_id)?,
        Some(r) if r.state == RequestState::Generating => r,
        Some(_) => return Ok(None),
        None => return Err(hintdesk_core::Error::UnknownRequest(request_id.to_string())),
    };
    let task = desk.tasks().describe(&request.question_id).to_owned();
    match pipeline.generate(&request, &task).await {
        Ok(generated) => desk
            .deliver_hint(request_id, generated.text, generated.latency)
            .map(Some),
        Err(e) => {
            warn!(request = %request_id, error = %e, "hint generation failed");
            desk.fail_generation(request_id, e.to_string())?;
            Ok(None)
        }
    }
}
