//! Opaque identifiers.
//!
//! Every identifier is a string minted by the service. Newtypes keep a
//! `HintId` from being passed where an `EscalationId` is expected.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($($(#[$meta:meta])* $name:ident),* $(,)?) => {$(
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }
    )*};
}

id_newtype!(
    StudentId,
    InstructorId,
    AssignmentId,
    QuestionId,
    RequestId,
    HintId,
    EscalationId,
    FeedbackId,
    /// Instructor-facing stand-in for a student. Never derived from the
    /// student identifier.
    AnonymousToken,
);

/// The kinds of identifier the service mints; the prefix makes log lines
/// easier to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdKind {
    Request,
    Hint,
    Escalation,
    Feedback,
    Anonymous,
}

impl IdKind {
    pub fn prefix(self) -> &'static str {
        match self {
            IdKind::Request => "req",
            IdKind::Hint => "hint",
            IdKind::Escalation => "esc",
            IdKind::Feedback => "fb",
            IdKind::Anonymous => "anon",
        }
    }
}

pub trait IdGenerator: Send + Sync {
    fn next_id(&self, kind: IdKind) -> String;
}

/// Random v4 UUIDs. Safe across restarts.
#[derive(Debug, Default, Clone, Copy)]
pub struct UuidIds;

impl IdGenerator for UuidIds {
    fn next_id(&self, kind: IdKind) -> String {
        format!("{}-{}", kind.prefix(), uuid::Uuid::new_v4().simple())
    }
}

/// Counter-based ids for fixtures and tests. Not unique across process
/// restarts unless seeded past the highest id already in the log.
#[derive(Debug, Default)]
pub struct SequentialIds {
    next: AtomicU64,
}

impl SequentialIds {
    pub fn new() -> Self {
        Self::starting_at(1)
    }

    pub fn starting_at(first: u64) -> Self {
        Self {
            next: AtomicU64::new(first),
        }
    }
}

impl IdGenerator for SequentialIds {
    fn next_id(&self, kind: IdKind) -> String {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        format!("{}-{:06}", kind.prefix(), n)
    }
}
