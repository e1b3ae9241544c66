//! Consent gating and per-question hint quotas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{AssignmentId, QuestionId, RequestId, StudentId};
use crate::model::{HelpRequest, HintType, QuotaPolicy, RequestState, StudentProfile};
use crate::time::Timestamp;

/// Hints still available to one student on one question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemainingQuota {
    pub planning: u32,
    pub debugging: u32,
    pub optimization: u32,
}

impl RemainingQuota {
    pub fn get(&self, hint_type: HintType) -> u32 {
        match hint_type {
            HintType::Planning => self.planning,
            HintType::Debugging => self.debugging,
            HintType::Optimization => self.optimization,
        }
    }
}

/// Limit minus hints that were delivered or are still being generated.
/// Failed generations do not count.
///
/// In-flight requests hold their slot so that concurrent requests cannot
/// overshoot the limit once they all deliver.
pub fn remaining_quota<'a>(
    student_id: &StudentId,
    question_id: &QuestionId,
    policy: &QuotaPolicy,
    history: impl IntoIterator<Item = &'a HelpRequest>,
) -> RemainingQuota {
    let mut used = [0u32; 3];
    for request in history {
        if &request.student_id != student_id || &request.question_id != question_id {
            continue;
        }
        if request.state.has_delivered() || request.state.is_in_flight() {
            used[slot(request.hint_type)] += 1;
        }
    }
    let left = |t: HintType| policy.limit(t).saturating_sub(used[slot(t)]);
    RemainingQuota {
        planning: left(HintType::Planning),
        debugging: left(HintType::Debugging),
        optimization: left(HintType::Optimization),
    }
}

fn slot(hint_type: HintType) -> usize {
    match hint_type {
        HintType::Planning => 0,
        HintType::Debugging => 1,
        HintType::Optimization => 2,
    }
}

/// What a student submits when clicking a hint button.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestDraft {
    pub assignment_id: AssignmentId,
    pub question_id: QuestionId,
    pub hint_type: HintType,
    #[serde(default)]
    pub comment: Option<String>,
    /// May be empty: planning hints are often requested before any code.
    #[serde(default)]
    pub code: String,
}

pub fn create_help_request<'a>(
    student: &StudentProfile,
    draft: RequestDraft,
    policy: &QuotaPolicy,
    history: impl IntoIterator<Item = &'a HelpRequest>,
    request_id: RequestId,
    now: Timestamp,
) -> Result<HelpRequest> {
    if !student.consent_given() {
        return Err(Error::ConsentMissing);
    }
    let remaining = remaining_quota(&student.student_id, &draft.question_id, policy, history);
    if remaining.get(draft.hint_type) == 0 {
        return Err(Error::QuotaExceeded(draft.hint_type));
    }
    let comment = draft.comment.filter(|c| !c.trim().is_empty());
    Ok(HelpRequest {
        request_id,
        student_id: student.student_id.clone(),
        assignment_id: draft.assignment_id,
        question_id: draft.question_id,
        hint_type: draft.hint_type,
        student_comment: comment,
        code_snapshot: draft.code,
        created_at: now,
        state: RequestState::Created,
    })
}
