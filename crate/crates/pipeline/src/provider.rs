//! Completion providers: an HTTP client for chat-completion endpoints and a
//! deterministic mock.

use std::env;
use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::Stage;
use crate::trace::{Call, CallLog};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider did not answer within {0:?}")]
    Timeout(Duration),
    #[error("provider error: {0}")]
    Failed(String),
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    async fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Remote,
    #[default]
    Mock,
}

/// Provider settings. `timeout` is the budget for a whole hint, retries
/// included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(rename = "timeout_secs", with = "secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// Seed for the mock provider.
    pub seed: u64,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            model: "gpt-4o".into(),
            timeout: DEFAULT_TIMEOUT,
            max_retries: 1,
            api_key_env: "HINTDESK_PROVIDER_KEY".into(),
            seed: 0,
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Finds the `stage: <Name>` marker line that every template starts with.
pub fn detect_stage(prompt: &str) -> Option<Stage> {
    let line = prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix("stage:"))?;
    let name = line.trim();
    Stage::ALL.into_iter().find(|s| s.as_str() == name)
}

const HINT_OPENERS: [&str; 4] = [
    "Look closely at how your code",
    "Check the step where your code",
    "Think about what happens when your code",
    "Compare the task description with how your code",
];

const PLAN_STEPS: [&str; 3] = [
    "1. Load and inspect the data. 2. Select the rows you need. 3. Compute the result and check it on a small example.",
    "1. Restate what the output should look like. 2. Find the columns involved. 3. Build the answer one transformation at a time.",
    "1. Print the first rows to learn the structure. 2. Handle missing values. 3. Aggregate and verify the totals.",
];

/// Deterministic stand-in for a language model. The output starts with a
/// tag naming the stage found in the prompt.
pub fn mock_complete(prompt: &str, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let pick = digest[0] as usize;
    let reference: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    match detect_stage(prompt) {
        Some(Stage::FixGeneration) => format!("FIX: corrected program {reference}"),
        Some(Stage::HintGeneration) => format!(
            "HINT: {} handles the data around one expression. [{reference}]",
            HINT_OPENERS[pick % HINT_OPENERS.len()]
        ),
        Some(Stage::PlanGeneration) => {
            format!(
                "PLAN: {} [{reference}]",
                PLAN_STEPS[pick % PLAN_STEPS.len()]
            )
        }
        Some(Stage::OptimizationGeneration) => {
            format!(
                "OPTIMIZE: Replace the explicit loop with a vectorised operation. [{reference}]"
            )
        }
        None => format!("TEXT: {reference}"),
    }
}

/// Mock provider with an optional call log, injected failures and delay.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    log: Option<CallLog>,
    failures_left: AtomicU32,
    delay: Option<Duration>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_log(mut self, log: CallLog) -> Self {
        self.log = Some(log);
        self
    }

    /// The next `n` calls fail.
    pub fn failing(self, n: u32) -> Self {
        self.failures_left.store(n, Ordering::SeqCst);
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if let Some(log) = &self.log {
            log.push(Call::Complete(detect_stage(prompt)));
        }
        if let Some(delay) = self.delay {
            tokio::time::sleep(delay).await;
        }
        let failing = self
            .failures_left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if failing {
            return Err(ProviderError::Failed("injected failure".into()));
        }
        Ok(mock_complete(prompt, self.seed))
    }
}

/// Client for OpenAI-style `chat/completions` endpoints.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

impl RemoteProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Self {
        Self {
            client: reqwest::Client::new(),
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
        }
    }

    /// Builds a client from config, reading the key from the environment.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| ProviderError::Failed("remote provider needs an endpoint".into()))?;
        let api_key = env::var(&config.api_key_env).ok();
        Ok(Self::new(endpoint, config.model.clone(), api_key))
    }
}

#[async_trait]
impl CompletionProvider for RemoteProvider {
    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let failed = |e: reqwest::Error| ProviderError::Failed(e.to_string());
        let response = request.send().await.map_err(failed)?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::Failed(format!("endpoint returned {status}")));
        }
        let reply: ChatResponse = response.json().await.map_err(failed)?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|text| !text.trim().is_empty())
            .ok_or_else(|| ProviderError::Failed("empty completion".into()))
    }
}
