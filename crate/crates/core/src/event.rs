//! Event records and their line format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"seq":1,"ts":"2025-01-06T09:00:00.000Z","actor":"Student","kind":"ConsentGiven","payload":{"student_id":"s1"}}
//! ```

use serde::{Deserialize, Serialize};

use crate::ids::{EscalationId, HintId, InstructorId, RequestId, StudentId};
use crate::model::{ActivityPayload, Escalation, HelpRequest, Hint, InstructorFeedback, Rating};
use crate::taxonomy::AnnotatedCase;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    Student,
    Instructor,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    ConsentGiven,
    RequestCreated,
    GenerationStarted,
    HintDelivered,
    GenerationFailed,
    HintRated,
    Escalated,
    EscalationViewed,
    FeedbackSubmitted,
    LeaseAcquired,
    LeaseReleased,
    ActivityObserved,
    CaseAnnotated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    ConsentGiven {
        student_id: StudentId,
    },
    RequestCreated {
        request: HelpRequest,
    },
    GenerationStarted {
        request_id: RequestId,
    },
    HintDelivered {
        hint: Hint,
    },
    GenerationFailed {
        request_id: RequestId,
        reason: String,
    },
    HintRated {
        hint_id: HintId,
        rating: Rating,
    },
    Escalated {
        escalation: Escalation,
    },
    EscalationViewed {
        escalation_id: EscalationId,
        instructor_id: InstructorId,
    },
    FeedbackSubmitted {
        feedback: InstructorFeedback,
    },
    LeaseAcquired {
        escalation_id: EscalationId,
        instructor_id: InstructorId,
        expires_at: Timestamp,
    },
    LeaseReleased {
        escalation_id: EscalationId,
        instructor_id: InstructorId,
    },
    ActivityObserved(ActivityPayload),
    CaseAnnotated {
        case: AnnotatedCase,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::ConsentGiven { .. } => EventKind::ConsentGiven,
            EventBody::RequestCreated { .. } => EventKind::RequestCreated,
            EventBody::GenerationStarted { .. } => EventKind::GenerationStarted,
            EventBody::HintDelivered { .. } => EventKind::HintDelivered,
            EventBody::GenerationFailed { .. } => EventKind::GenerationFailed,
            EventBody::HintRated { .. } => EventKind::HintRated,
            EventBody::Escalated { .. } => EventKind::Escalated,
            EventBody::EscalationViewed { .. } => EventKind::EscalationViewed,
            EventBody::FeedbackSubmitted { .. } => EventKind::FeedbackSubmitted,
            EventBody::LeaseAcquired { .. } => EventKind::LeaseAcquired,
            EventBody::LeaseReleased { .. } => EventKind::LeaseReleased,
            EventBody::ActivityObserved(_) => EventKind::ActivityObserved,
            EventBody::CaseAnnotated { .. } => EventKind::CaseAnnotated,
        }
    }

    /// Who causes this kind of event.
    pub fn actor(&self) -> Actor {
        match self.kind() {
            EventKind::ConsentGiven
            | EventKind::RequestCreated
            | EventKind::HintRated
            | EventKind::Escalated
            | EventKind::ActivityObserved => Actor::Student,
            EventKind::GenerationStarted
            | EventKind::HintDelivered
            | EventKind::GenerationFailed => Actor::System,
            EventKind::EscalationViewed
            | EventKind::FeedbackSubmitted
            | EventKind::LeaseAcquired
            | EventKind::LeaseReleased
            | EventKind::CaseAnnotated => Actor::Instructor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub ts: Timestamp,
    pub actor: Actor,
    #[serde(flatten)]
    pub body: EventBody,
}

impl EventRecord {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format_has_expected_field_order() {
        let record = EventRecord {
            seq: 1,
            ts: "2025-01-06T09:00:00Z".parse().unwrap(),
            actor: Actor::Student,
            body: EventBody::ConsentGiven {
                student_id: "s1".into(),
            },
        };
        assert_eq!(
            record.to_line(),
            r#"{"seq":1,"ts":"2025-01-06T09:00:00.000Z","actor":"Student","kind":"ConsentGiven","payload":{"student_id":"s1"}}"#
        );
        let back: EventRecord = serde_json::from_str(&record.to_line()).unwrap();
        assert_eq!(back, record);
    }

    #[test]
    fn activity_payload_is_inline() {
        let record = EventRecord {
            seq: 7,
            ts: "2025-01-06T09:00:00Z".parse().unwrap(),
            actor: Actor::Student,
            body: EventBody::ActivityObserved(ActivityPayload {
                student_id: "s1".into(),
                question_id: "q1".into(),
                activity: crate::model::ActivityKind::VideoWatch,
                at: "2025-01-06T08:59:00Z".parse().unwrap(),
            }),
        };
        let line = record.to_line();
        assert!(line.contains(
            r#""payload":{"student_id":"s1","question_id":"q1","activity":"video_watch""#
        ));
        let back: EventRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
    }
}
