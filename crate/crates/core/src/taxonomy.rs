//! Manual labels attached to unhelpful-hint cases during analysis.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{EscalationId, HintId};
use crate::time::Timestamp;

/// Mistake categories for data-science code. One program may carry several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugType {
    DatasetMisunderstanding,
    TaskMisunderstanding,
    MissingValueMishandling,
    SemanticBug,
    LanguageEnvironmentBug,
    SuboptimalCoding,
}

impl BugType {
    pub const ALL: [BugType; 6] = [
        BugType::DatasetMisunderstanding,
        BugType::TaskMisunderstanding,
        BugType::MissingValueMishandling,
        BugType::SemanticBug,
        BugType::LanguageEnvironmentBug,
        BugType::SuboptimalCoding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BugType::DatasetMisunderstanding => "dataset_misunderstanding",
            BugType::TaskMisunderstanding => "task_misunderstanding",
            BugType::MissingValueMishandling => "missing_value_mishandling",
            BugType::SemanticBug => "semantic_bug",
            BugType::LanguageEnvironmentBug => "language_environment_bug",
            BugType::SuboptimalCoding => "suboptimal_coding",
        }
    }
}

/// Why a hint (or a piece of instructor feedback) fell short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnhelpfulReason {
    Incorrect,
    Uninformative,
    Misfocused,
    Unclear,
}

impl UnhelpfulReason {
    pub const ALL: [UnhelpfulReason; 4] = [
        UnhelpfulReason::Incorrect,
        UnhelpfulReason::Uninformative,
        UnhelpfulReason::Misfocused,
        UnhelpfulReason::Unclear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnhelpfulReason::Incorrect => "incorrect",
            UnhelpfulReason::Uninformative => "uninformative",
            UnhelpfulReason::Misfocused => "misfocused",
            UnhelpfulReason::Unclear => "unclear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLabel {
    High,
    Low,
}

/// High exactly when no quality criterion failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuality")]
pub struct FeedbackQuality {
    label: QualityLabel,
    low_reasons: BTreeSet<UnhelpfulReason>,
}

#[derive(Deserialize)]
struct RawQuality {
    label: QualityLabel,
    #[serde(default)]
    low_reasons: BTreeSet<UnhelpfulReason>,
}

impl TryFrom<RawQuality> for FeedbackQuality {
    type Error = Error;

    fn try_from(raw: RawQuality) -> Result<Self> {
        match raw.label {
            QualityLabel::High if raw.low_reasons.is_empty() => Ok(FeedbackQuality::high()),
            QualityLabel::High => Err(Error::InvalidQuality),
            QualityLabel::Low => FeedbackQuality::low(raw.low_reasons),
        }
    }
}

impl FeedbackQuality {
    pub fn high() -> Self {
        Self {
            label: QualityLabel::High,
            low_reasons: BTreeSet::new(),
        }
    }

    pub fn low(reasons: impl IntoIterator<Item = UnhelpfulReason>) -> Result<Self> {
        let low_reasons: BTreeSet<_> = reasons.into_iter().collect();
        if low_reasons.is_empty() {
            return Err(Error::InvalidQuality);
        }
        Ok(Self {
            label: QualityLabel::Low,
            low_reasons,
        })
    }

    pub fn label(&self) -> QualityLabel {
        self.label
    }

    pub fn is_high(&self) -> bool {
        self.label == QualityLabel::High
    }

    pub fn low_reasons(&self) -> &BTreeSet<UnhelpfulReason> {
        &self.low_reasons
    }
}

/// What an annotation is about. Escalated cases are addressed by their
/// escalation; unhelpful hints that were never escalated by their hint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationTarget {
    Escalation(EscalationId),
    Hint(HintId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedCase {
    pub hint_id: HintId,
    pub escalation_id: Option<EscalationId>,
    pub bug_types: BTreeSet<BugType>,
    pub unhelpful_reasons: BTreeSet<UnhelpfulReason>,
    pub feedback_quality: Option<FeedbackQuality>,
    pub annotator: String,
    pub annotated_at: Timestamp,
}
