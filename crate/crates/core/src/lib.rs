//! Domain model, event log, and escalation queue for the hintdesk help
//! service.
//!
//! All state is derived from an append-only event log. [`HelpDesk`] is the
//! write path: each command is validated against the current
//! [`ServiceState`], turned into events, appended durably, and only then
//! folded into memory. Replaying the same log always rebuilds the same
//! state.

pub mod desk;
pub mod error;
pub mod event;
pub mod ids;
pub mod lifecycle;
pub mod log;
pub mod model;
pub mod queue;
pub mod quota;
#[cfg(feature = "sim")]
pub mod sim;
pub mod state;
pub mod taxonomy;
pub mod time;

pub use desk::{DeskConfig, EventObserver, HelpDesk, StudentHintView, TaskCatalog};
pub use error::{Error, Result};
pub use event::{Actor, EventBody, EventKind, EventRecord};
pub use ids::*;
pub use lifecycle::{apply_transition, rate_hint};
pub use log::{EventLog, FileLog, MemoryLog};
pub use model::*;
pub use queue::EscalationContext;
pub use quota::{create_help_request, remaining_quota, RemainingQuota, RequestDraft};
pub use state::{ServiceState, Snapshot};
pub use taxonomy::*;
pub use time::{Clock, ManualClock, SystemClock, Timestamp};
