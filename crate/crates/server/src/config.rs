//! Service configuration, read from a TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::TimeDelta;
use hintdesk_core::{DeskConfig, QuotaPolicy, TaskCatalog};
use hintdesk_pipeline::{ExecLimits, ProviderConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::TokenEntry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    /// The event log. Relative paths are resolved against the config file.
    pub log_path: PathBuf,
    pub quota: QuotaPolicy,
    pub lease_minutes: i64,
    /// Show students which instructor answered.
    pub attribute_feedback: bool,
    pub provider: ProviderConfig,
    pub sandbox: SandboxConfig,
    /// Directory with template overrides.
    pub templates_dir: Option<PathBuf>,
    /// Task description per question id.
    pub tasks: TaskCatalog,
    pub notify: NotifyConfig,
    pub tokens: Vec<TokenEntry>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            log_path: "events.jsonl".into(),
            quota: QuotaPolicy::default(),
            lease_minutes: 30,
            attribute_feedback: false,
            provider: ProviderConfig::default(),
            sandbox: SandboxConfig::default(),
            templates_dir: None,
            tasks: TaskCatalog::new(),
            notify: NotifyConfig::default(),
            tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    /// Interpreter and leading arguments.
    pub command: Vec<String>,
    pub limits: ExecLimits,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            command: vec!["python3".into()],
            limits: ExecLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotifierKind {
    #[default]
    Log,
    Mail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NotifyConfig {
    pub adapter: NotifierKind,
    /// Extra attempts after the first.
    pub retries: u32,
    pub retry_delay_ms: u64,
    pub mail: MailConfig,
}

impl Default for NotifyConfig {
    fn default() -> Self {
        Self {
            adapter: NotifierKind::Log,
            retries: 2,
            retry_delay_ms: 1000,
            mail: MailConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MailConfig {
    pub smtp_host: String,
    pub smtp_port: u16,
    pub from: String,
    pub instructors: Vec<String>,
    /// `{student}` is replaced by the student id.
    pub student_address: String,
}

impl Default for MailConfig {
    fn default() -> Self {
        Self {
            smtp_host: "localhost".into(),
            smtp_port: 25,
            from: "hintdesk@localhost".into(),
            instructors: Vec::new(),
            student_address: "{student}@localhost".into(),
        }
    }
}

impl Config {
    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        let mut config: Config = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.log_path = base.join(&config.log_path);
        config.templates_dir = config.templates_dir.map(|d| base.join(d));
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lease_minutes <= 0 {
            return Err(ConfigError::Invalid(
                "lease_minutes must be positive".into(),
            ));
        }
        if self.sandbox.command.is_empty() {
            return Err(ConfigError::Invalid(
                "sandbox.command must name an interpreter".into(),
            ));
        }
        crate::auth::Tokens::new(&self.tokens).map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn desk_config(&self) -> DeskConfig {
        DeskConfig {
            policy: self.quota,
            lease_duration: TimeDelta::minutes(self.lease_minutes),
            attribute_feedback: self.attribute_feedback,
        }
    }
}
