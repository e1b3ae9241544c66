//! Prompt assembly from plain-text templates with `{{name}}` placeholders.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which prompt is being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    FixGeneration,
    HintGeneration,
    PlanGeneration,
    OptimizationGeneration,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::FixGeneration,
        Stage::HintGeneration,
        Stage::PlanGeneration,
        Stage::OptimizationGeneration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::FixGeneration => "FixGeneration",
            Stage::HintGeneration => "HintGeneration",
            Stage::PlanGeneration => "PlanGeneration",
            Stage::OptimizationGeneration => "OptimizationGeneration",
        }
    }

    pub fn is_debugging(self) -> bool {
        matches!(self, Stage::FixGeneration | Stage::HintGeneration)
    }

    fn file_name(self) -> &'static str {
        match self {
            Stage::FixGeneration => "fix_generation.txt",
            Stage::HintGeneration => "hint_generation.txt",
            Stage::PlanGeneration => "plan_generation.txt",
            Stage::OptimizationGeneration => "optimization_generation.txt",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            Stage::FixGeneration => include_str!("../templates/fix_generation.txt"),
            Stage::HintGeneration => include_str!("../templates/hint_generation.txt"),
            Stage::PlanGeneration => include_str!("../templates/plan_generation.txt"),
            Stage::OptimizationGeneration => {
                include_str!("../templates/optimization_generation.txt")
            }
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a prompt may mention. Deliberately has no student identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub stage: Stage,
    pub task_description: String,
    pub student_code: String,
    pub student_comment: Option<String>,
    pub execution_output: Option<String>,
    pub candidate_fix: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{stage} prompt requires {field}")]
    MissingField { stage: Stage, field: &'static str },
    #[error("{field} is not allowed in a {stage} prompt")]
    InconsistentField { stage: Stage, field: &'static str },
    #[error("template for {stage} uses unknown placeholder {{{{{name}}}}}")]
    UnknownPlaceholder { stage: Stage, name: String },
    #[error("template for {stage} has an unterminated placeholder")]
    Unterminated { stage: Stage },
}

const ABSENT: &str = "(none)";

impl PromptBundle {
    /// Checks field presence against the stage.
    pub fn validate(&self) -> Result<(), PromptError> {
        let stage = self.stage;
        if !stage.is_debugging() && self.execution_output.is_some() {
            return Err(PromptError::InconsistentField {
                stage,
                field: "execution_output",
            });
        }
        match stage {
            Stage::HintGeneration if self.candidate_fix.is_none() => {
                Err(PromptError::MissingField {
                    stage,
                    field: "candidate_fix",
                })
            }
            Stage::HintGeneration => Ok(()),
            _ if self.candidate_fix.is_some() => Err(PromptError::InconsistentField {
                stage,
                field: "candidate_fix",
            }),
            _ => Ok(()),
        }
    }

    fn value(&self, name: &str) -> Option<&str> {
        fn optional(v: &Option<String>) -> &str {
            v.as_deref().unwrap_or(ABSENT)
        }
        Some(match name {
            "stage" => self.stage.as_str(),
            "task_description" => &self.task_description,
            "student_code" => &self.student_code,
            "student_comment" => optional(&self.student_comment),
            "execution_output" => optional(&self.execution_output),
            "candidate_fix" => optional(&self.candidate_fix),
            _ => return None,
        })
    }
}

/// One template per stage.
#[derive(Debug, Clone)]
pub struct Templates {
    texts: [String; 4],
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            texts: Stage::ALL.map(|s| s.builtin().to_owned()),
        }
    }
}

impl Templates {
    /// Loads `<stage>.txt` files from `dir`; stages without a file keep the
    /// built-in text.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut templates = Self::default();
        for (slot, stage) in templates.texts.iter_mut().zip(Stage::ALL) {
            match fs::read_to_string(dir.join(stage.file_name())) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(templates)
    }

    pub fn text(&self, stage: Stage) -> &str {
        &self.texts[stage as usize]
    }

    /// Renders the bundle's stage template. Substitution is single-pass, so
    /// braces inside student code are left alone.
    pub fn render(&self, bundle: &PromptBundle) -> Result<String, PromptError> {
        bundle.validate()?;
        let stage = bundle.stage;
        let mut out = String::new();
        let mut rest = self.text(stage);
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or(PromptError::Unterminated { stage })?;
            let name = after[..close].trim();
            let value = bundle
                .value(name)
                .ok_or_else(|| PromptError::UnknownPlaceholder {
                    stage,
                    name: name.to_owned(),
                })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Renders with the built-in templates.
pub fn build_prompt(bundle: &PromptBundle) -> Result<String, PromptError> {
    Templates::default().render(bundle)
}
