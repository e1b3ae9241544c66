//! Records that make up the service state.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ids::{
    AnonymousToken, AssignmentId, EscalationId, FeedbackId, HintId, InstructorId, QuestionId,
    RequestId, StudentId,
};
use crate::time::{duration_ms, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintType {
    Planning,
    Debugging,
    Optimization,
}

impl HintType {
    pub const ALL: [HintType; 3] = [
        HintType::Planning,
        HintType::Debugging,
        HintType::Optimization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HintType::Planning => "planning",
            HintType::Debugging => "debugging",
            HintType::Optimization => "optimization",
        }
    }
}

impl fmt::Display for HintType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-question hint allowance for each hint type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuotaPolicy {
    pub planning: u32,
    pub debugging: u32,
    pub optimization: u32,
}

impl Default for QuotaPolicy {
    fn default() -> Self {
        Self {
            planning: 1,
            debugging: 3,
            optimization: 1,
        }
    }
}

impl QuotaPolicy {
    pub fn limit(&self, hint_type: HintType) -> u32 {
        match hint_type {
            HintType::Planning => self.planning,
            HintType::Debugging => self.debugging,
            HintType::Optimization => self.optimization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: StudentId,
    consent_given: bool,
    consent_timestamp: Option<Timestamp>,
}

impl StudentProfile {
    pub fn new(student_id: StudentId) -> Self {
        Self {
            student_id,
            consent_given: false,
            consent_timestamp: None,
        }
    }

    pub fn consent_given(&self) -> bool {
        self.consent_given
    }

    pub fn consent_timestamp(&self) -> Option<Timestamp> {
        self.consent_timestamp
    }

    /// Idempotent; the first timestamp wins.
    pub fn record_consent(&self, at: Timestamp) -> StudentProfile {
        if self.consent_given {
            return self.clone();
        }
        StudentProfile {
            student_id: self.student_id.clone(),
            consent_given: true,
            consent_timestamp: Some(at),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Created,
    Generating,
    Delivered,
    Failed,
    RatedHelpful,
    RatedUnhelpful,
    Escalated,
    InstructorViewed,
    Resolved,
}

impl RequestState {
    pub const ALL: [RequestState; 9] = [
        RequestState::Created,
        RequestState::Generating,
        RequestState::Delivered,
        RequestState::Failed,
        RequestState::RatedHelpful,
        RequestState::RatedUnhelpful,
        RequestState::Escalated,
        RequestState::InstructorViewed,
        RequestState::Resolved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestState::Created => "created",
            RequestState::Generating => "generating",
            RequestState::Delivered => "delivered",
            RequestState::Failed => "failed",
            RequestState::RatedHelpful => "rated_helpful",
            RequestState::RatedUnhelpful => "rated_unhelpful",
            RequestState::Escalated => "escalated",
            RequestState::InstructorViewed => "instructor_viewed",
            RequestState::Resolved => "resolved",
        }
    }

    /// True once a hint has reached the student.
    pub fn has_delivered(self) -> bool {
        !matches!(
            self,
            RequestState::Created | RequestState::Generating | RequestState::Failed
        )
    }

    pub fn is_in_flight(self) -> bool {
        matches!(self, RequestState::Created | RequestState::Generating)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleEvent {
    StartGeneration,
    Deliver,
    Fail,
    RateHelpful,
    RateUnhelpful,
    Escalate,
    InstructorView,
    Resolve,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 8] = [
        LifecycleEvent::StartGeneration,
        LifecycleEvent::Deliver,
        LifecycleEvent::Fail,
        LifecycleEvent::RateHelpful,
        LifecycleEvent::RateUnhelpful,
        LifecycleEvent::Escalate,
        LifecycleEvent::InstructorView,
        LifecycleEvent::Resolve,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpRequest {
    pub request_id: RequestId,
    pub student_id: StudentId,
    pub assignment_id: AssignmentId,
    pub question_id: QuestionId,
    pub hint_type: HintType,
    pub student_comment: Option<String>,
    pub code_snapshot: String,
    pub created_at: Timestamp,
    pub state: RequestState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Helpful,
    Unhelpful,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub hint_id: HintId,
    pub request_id: RequestId,
    pub text: String,
    pub generated_at: Timestamp,
    #[serde(rename = "generation_latency_ms", with = "duration_ms")]
    pub generation_latency: Duration,
    pub rating: Option<Rating>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationStatus {
    Pending,
    Viewed,
    Resolved,
}

/// An unhelpful hint forwarded to instructors. Holds no student identity;
/// the link back to the student goes through the hint's request, which
/// never leaves the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Escalation {
    pub escalation_id: EscalationId,
    pub hint_id: HintId,
    pub anonymous_token: AnonymousToken,
    pub student_note: Option<String>,
    pub created_at: Timestamp,
    pub status: EscalationStatus,
    pub viewed_at: Option<Timestamp>,
    pub resolved_at: Option<Timestamp>,
    pub claimed_by: Option<InstructorId>,
    pub claim_expires_at: Option<Timestamp>,
}

impl Escalation {
    pub fn is_unresolved(&self) -> bool {
        self.status != EscalationStatus::Resolved
    }

    /// The instructor holding an unexpired lease at `now`, if any.
    pub fn active_claim(&self, now: Timestamp) -> Option<&InstructorId> {
        match (&self.claimed_by, self.claim_expires_at) {
            (Some(holder), Some(expires)) if expires > now => Some(holder),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructorFeedback {
    pub feedback_id: FeedbackId,
    pub escalation_id: EscalationId,
    pub instructor_id: InstructorId,
    pub text: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Coding,
    VideoWatch,
    HintRequest,
    QuestionSolved,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 4] = [
        ActivityKind::Coding,
        ActivityKind::VideoWatch,
        ActivityKind::HintRequest,
        ActivityKind::QuestionSolved,
    ];
}

/// Learning activity reported by the course platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPayload {
    pub student_id: StudentId,
    pub question_id: QuestionId,
    pub activity: ActivityKind,
    pub at: Timestamp,
}
