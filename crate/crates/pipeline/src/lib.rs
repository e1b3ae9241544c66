//! Hint generation for hintdesk: prompt templates, completion providers and
//! a sandbox for running student code.

pub mod generate;
pub mod prompt;
pub mod provider;
pub mod sandbox;
pub mod trace;

pub use generate::{fulfil, GeneratedHint, GenerationError, HintPipeline};
pub use prompt::{build_prompt, PromptBundle, PromptError, Stage, Templates};
pub use provider::{
    detect_stage, mock_complete, CompletionProvider, MockProvider, ProviderConfig, ProviderError,
    ProviderKind, RemoteProvider,
};
pub use sandbox::{
    CannedExecutor, CodeExecutor, ExecLimits, ExecutionResult, ExitStatus, ProcessSandbox,
    RecordingExecutor,
};
pub use trace::{Call, CallLog};
