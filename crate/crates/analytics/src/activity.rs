//! What students did between escalating and getting feedback.

use hintdesk_core::{ActivityKind, EscalationId, ServiceState, Timestamp};
use serde::{Deserialize, Serialize};

use crate::ratio::Ratio;

const HOUR_MS: i64 = 3_600_000;

/// First occurrence of each activity inside the waiting window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationTimeline {
    pub escalation_id: EscalationId,
    pub escalated_at: Timestamp,
    pub feedback_at: Option<Timestamp>,
    pub first_coding: Option<Timestamp>,
    pub first_video: Option<Timestamp>,
    pub first_hint_request: Option<Timestamp>,
    pub first_solved: Option<Timestamp>,
}

impl EscalationTimeline {
    fn contains(&self, at: Timestamp) -> bool {
        at >= self.escalated_at && self.feedback_at.is_none_or(|end| at <= end)
    }

    fn note(&mut self, kind: ActivityKind, at: Timestamp) {
        if !self.contains(at) {
            return;
        }
        let slot = match kind {
            ActivityKind::Coding => &mut self.first_coding,
            ActivityKind::VideoWatch => &mut self.first_video,
            ActivityKind::HintRequest => &mut self.first_hint_request,
            ActivityKind::QuestionSolved => &mut self.first_solved,
        };
        if slot.is_none_or(|first| at < first) {
            *slot = Some(at);
        }
    }

    pub fn coded_within_first_hour(&self) -> bool {
        self.first_coding
            .is_some_and(|at| at.millis_since(self.escalated_at) <= HOUR_MS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActivityStats {
    pub escalations: u64,
    pub coding: Ratio,
    pub coding_first_hour: Ratio,
    pub video: Ratio,
    pub further_hints: Ratio,
    pub solved_before_feedback: Ratio,
    pub timelines: Vec<EscalationTimeline>,
}

/// The window runs from the escalation to its feedback (inclusive), or is
/// open-ended while unresolved. Hint requests count both requests the
/// service saw and ones the platform reported.
pub fn compute_activity_during_wait(state: &ServiceState) -> ActivityStats {
    let mut timelines = Vec::new();
    for escalation in state.escalations_in_queue_order() {
        let Some(request) = state.request_for_escalation(escalation) else {
            continue;
        };
        let mut timeline = EscalationTimeline {
            escalation_id: escalation.escalation_id.clone(),
            escalated_at: escalation.created_at,
            feedback_at: state
                .feedback_for_escalation(&escalation.escalation_id)
                .map(|f| f.created_at),
            first_coding: None,
            first_video: None,
            first_hint_request: None,
            first_solved: None,
        };
        let same_question = |student: &_, question: &_| {
            *student == request.student_id && *question == request.question_id
        };
        for activity in state.activities() {
            if same_question(&activity.student_id, &activity.question_id) {
                timeline.note(activity.activity, activity.at);
            }
        }
        for other in state.requests() {
            if other.request_id != request.request_id
                && same_question(&other.student_id, &other.question_id)
            {
                timeline.note(ActivityKind::HintRequest, other.created_at);
            }
        }
        timelines.push(timeline);
    }
    let n = timelines.len() as u64;
    let count = |f: fn(&EscalationTimeline) -> bool| {
        Ratio::new(timelines.iter().filter(|t| f(t)).count() as u64, n)
    };
    ActivityStats {
        escalations: n,
        coding: count(|t| t.first_coding.is_some()),
        coding_first_hour: count(EscalationTimeline::coded_within_first_hour),
        video: count(|t| t.first_video.is_some()),
        further_hints: count(|t| t.first_hint_request.is_some()),
        solved_before_feedback: count(|t| t.first_solved.is_some()),
        timelines,
    }
}
