use thiserror::Error;

use crate::model::{HintType, LifecycleEvent, RequestState};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the student has not accepted the consent notice")]
    ConsentMissing,
    #[error("no {0} hints left for this question")]
    QuotaExceeded(HintType),
    #[error("illegal transition: {event:?} from {from:?}")]
    IllegalTransition {
        from: RequestState,
        event: LifecycleEvent,
    },
    #[error("hint has already been rated")]
    AlreadyRated,
    #[error("hint request is not in the delivered state")]
    NotDelivered,
    #[error("only hints rated unhelpful can be escalated")]
    NotUnhelpful,
    #[error("hint has already been escalated")]
    DuplicateEscalation,
    #[error("caller does not hold the lease on this escalation")]
    NotLeaseHolder,
    #[error("escalation is already resolved")]
    AlreadyResolved,
    #[error("feedback text must not be empty")]
    EmptyFeedback,
    #[error("unhelpful cases need at least one reason")]
    EmptyReasonSet,
    #[error("low-quality feedback needs at least one reason")]
    InvalidQuality,
    #[error("unknown request {0}")]
    UnknownRequest(String),
    #[error("unknown hint {0}")]
    UnknownHint(String),
    #[error("unknown escalation {0}")]
    UnknownEscalation(String),
    #[error("storage failure: {0}")]
    StorageFailure(#[source] std::io::Error),
    #[error("corrupt log at sequence {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error("snapshot taken at {snapshot_seq} but tail starts at {tail_start}")]
    SnapshotMismatch { snapshot_seq: u64, tail_start: u64 },
}

impl Error {
    /// Stable machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ConsentMissing => "consent_missing",
            Error::QuotaExceeded(_) => "quota_exceeded",
            Error::IllegalTransition { .. } => "illegal_transition",
            Error::AlreadyRated => "already_rated",
            Error::NotDelivered => "not_delivered",
            Error::NotUnhelpful => "not_unhelpful",
            Error::DuplicateEscalation => "duplicate_escalation",
            Error::NotLeaseHolder => "not_lease_holder",
            Error::AlreadyResolved => "already_resolved",
            Error::EmptyFeedback => "empty_feedback",
            Error::EmptyReasonSet => "empty_reason_set",
            Error::InvalidQuality => "invalid_quality",
            Error::UnknownRequest(_) => "unknown_request",
            Error::UnknownHint(_) => "unknown_hint",
            Error::UnknownEscalation(_) => "unknown_escalation",
            Error::StorageFailure(_) => "storage_failure",
            Error::CorruptLog { .. } => "corrupt_log",
            Error::SnapshotMismatch { .. } => "snapshot_mismatch",
        }
    }

    pub(crate) fn corrupt(seq: u64, reason: impl Into<String>) -> Self {
        Error::CorruptLog {
            seq,
            reason: reason.into(),
        }
    }
}
