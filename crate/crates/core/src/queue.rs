//! Instructor queue: oldest unresolved escalation first, one lease holder
//! at a time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{AssignmentId, InstructorId, QuestionId};
use crate::model::{Escalation, HintType};
use crate::state::ServiceState;
use crate::time::Timestamp;

/// What an instructor sees for one escalation. Carries no student
/// identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationContext {
    pub escalation: Escalation,
    pub assignment_id: AssignmentId,
    pub question_id: QuestionId,
    pub hint_type: HintType,
    pub task_description: String,
    pub code_snapshot: String,
    pub student_comment: Option<String>,
    pub ai_hint_text: String,
    pub student_note: Option<String>,
}

/// The oldest unresolved escalation `instructor` may take at `now`: either
/// unleased, under an expired lease, or already leased to them.
pub fn next_available<'a>(
    state: &'a ServiceState,
    instructor: &InstructorId,
    now: Timestamp,
) -> Option<&'a Escalation> {
    state.escalations_in_queue_order().find(|e| {
        e.is_unresolved()
            && e.active_claim(now)
                .is_none_or(|holder| holder == instructor)
    })
}

pub fn ensure_lease_holder(
    escalation: &Escalation,
    instructor: &InstructorId,
    now: Timestamp,
) -> Result<()> {
    match escalation.active_claim(now) {
        Some(holder) if holder == instructor => Ok(()),
        _ => Err(Error::NotLeaseHolder),
    }
}

pub fn build_context(
    state: &ServiceState,
    escalation: &Escalation,
    task_description: &str,
) -> Option<EscalationContext> {
    let hint = state.hint(&escalation.hint_id)?;
    let request = state.request(&hint.request_id)?;
    Some(EscalationContext {
        escalation: escalation.clone(),
        assignment_id: request.assignment_id.clone(),
        question_id: request.question_id.clone(),
        hint_type: request.hint_type,
        task_description: task_description.to_owned(),
        code_snapshot: request.code_snapshot.clone(),
        student_comment: request.student_comment.clone(),
        ai_hint_text: hint.text.clone(),
        student_note: escalation.student_note.clone(),
    })
}
