//! Aggregates over the manually labelled cases.

use std::collections::BTreeMap;

use hintdesk_core::{BugType, ServiceState, UnhelpfulReason};
use serde::{Deserialize, Serialize};

use crate::ratio::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EscalationSplit {
    pub escalated: u64,
    pub not_escalated: u64,
    /// escalated / (escalated + not_escalated)
    pub escalation_rate: Ratio,
}

impl EscalationSplit {
    fn add(&mut self, escalated: bool) {
        if escalated {
            self.escalated += 1;
        } else {
            self.not_escalated += 1;
        }
        self.escalation_rate = Ratio::new(self.escalated, self.escalated + self.not_escalated);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QualitySplit {
    pub high: u64,
    pub low: u64,
}

impl QualitySplit {
    fn add(&mut self, high: bool) {
        if high {
            self.high += 1;
        } else {
            self.low += 1;
        }
    }

    pub fn high_rate(&self) -> Ratio {
        Ratio::new(self.high, self.high + self.low)
    }

    pub fn low_rate(&self) -> Ratio {
        Ratio::new(self.low, self.high + self.low)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub cases: u64,
    pub escalated_cases: u64,
    pub by_reason: BTreeMap<UnhelpfulReason, EscalationSplit>,
    pub by_bug_type: BTreeMap<BugType, EscalationSplit>,
    /// Escalated cases whose feedback was labelled.
    pub feedback_quality: QualitySplit,
    pub quality_by_reason: BTreeMap<UnhelpfulReason, QualitySplit>,
    pub quality_by_bug_type: BTreeMap<BugType, QualitySplit>,
    pub feedback_high_rate: Ratio,
    /// Low-quality share of labelled feedback on escalations that followed
    /// an incorrect AI hint.
    pub low_after_incorrect: Ratio,
}

/// A case counts as escalated if its hint has an escalation now, whatever
/// was true when it was labelled.
pub fn compute_annotation_stats(state: &ServiceState) -> AnnotationStats {
    let mut stats = AnnotationStats {
        by_reason: UnhelpfulReason::ALL
            .iter()
            .map(|r| (*r, EscalationSplit::default()))
            .collect(),
        by_bug_type: BugType::ALL
            .iter()
            .map(|b| (*b, EscalationSplit::default()))
            .collect(),
        quality_by_reason: UnhelpfulReason::ALL
            .iter()
            .map(|r| (*r, QualitySplit::default()))
            .collect(),
        quality_by_bug_type: BugType::ALL
            .iter()
            .map(|b| (*b, QualitySplit::default()))
            .collect(),
        ..AnnotationStats::default()
    };
    let mut after_incorrect = QualitySplit::default();
    for case in state.annotations() {
        let escalated = state.escalation_for_hint(&case.hint_id).is_some();
        stats.cases += 1;
        stats.escalated_cases += escalated as u64;
        for reason in &case.unhelpful_reasons {
            stats
                .by_reason
                .get_mut(reason)
                .expect("all reasons present")
                .add(escalated);
        }
        for bug in &case.bug_types {
            stats
                .by_bug_type
                .get_mut(bug)
                .expect("all bug types present")
                .add(escalated);
        }
        let Some(quality) = case.feedback_quality.as_ref().filter(|_| escalated) else {
            continue;
        };
        let high = quality.is_high();
        stats.feedback_quality.add(high);
        for reason in &case.unhelpful_reasons {
            stats
                .quality_by_reason
                .get_mut(reason)
                .expect("all reasons present")
                .add(high);
        }
        for bug in &case.bug_types {
            stats
                .quality_by_bug_type
                .get_mut(bug)
                .expect("all bug types present")
                .add(high);
        }
        if case.unhelpful_reasons.contains(&UnhelpfulReason::Incorrect) {
            after_incorrect.add(high);
        }
    }
    stats.feedback_high_rate = stats.feedback_quality.high_rate();
    stats.low_after_incorrect = after_incorrect.low_rate();
    stats
}
