//! Service state as a deterministic fold over the event log.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventBody, EventRecord};
use crate::ids::{EscalationId, FeedbackId, HintId, RequestId, StudentId};
use crate::lifecycle::{apply_transition, rate_hint};
use crate::log::{check_integrity, check_sequence};
use crate::model::{
    ActivityPayload, Escalation, EscalationStatus, HelpRequest, Hint, InstructorFeedback,
    LifecycleEvent, Rating, RequestState, StudentProfile,
};
use crate::taxonomy::AnnotatedCase;
use crate::time::Timestamp;

/// Everything the service knows. Maps are ordered so that the serialized
/// form is canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceState {
    last_seq: u64,
    last_ts: Option<Timestamp>,
    students: BTreeMap<StudentId, StudentProfile>,
    requests: BTreeMap<RequestId, HelpRequest>,
    hints: BTreeMap<HintId, Hint>,
    hint_by_request: BTreeMap<RequestId, HintId>,
    generation_failures: BTreeMap<RequestId, String>,
    escalations: BTreeMap<EscalationId, Escalation>,
    escalation_by_hint: BTreeMap<HintId, EscalationId>,
    /// Escalations in the order they were enqueued.
    escalation_order: Vec<EscalationId>,
    feedback: BTreeMap<FeedbackId, InstructorFeedback>,
    feedback_by_escalation: BTreeMap<EscalationId, FeedbackId>,
    annotations: BTreeMap<HintId, AnnotatedCase>,
    superseded_annotations: Vec<AnnotatedCase>,
    activities: Vec<ActivityPayload>,
}

/// Occupancy of each stage of the help funnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunnelCounts {
    pub requests: usize,
    pub delivered: usize,
    pub rated_unhelpful: usize,
    pub escalations: usize,
}

/// State captured at a known sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state: ServiceState,
}

impl ServiceState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Quotas are enforced when commands run, not here: the policy may
    /// change between deployments and old logs must still replay.
    pub fn replay(records: &[EventRecord]) -> Result<Self> {
        check_integrity(records)?;
        let mut state = Self::new();
        for record in records {
            state.apply(record)?;
        }
        Ok(state)
    }

    /// Rebuilds from a snapshot plus every event after it.
    pub fn restore(snapshot: Snapshot, tail: &[EventRecord]) -> Result<Self> {
        if let Some(first) = tail.first() {
            if first.seq != snapshot.seq + 1 {
                return Err(Error::SnapshotMismatch {
                    snapshot_seq: snapshot.seq,
                    tail_start: first.seq,
                });
            }
        }
        if snapshot.state.last_seq != snapshot.seq {
            return Err(Error::SnapshotMismatch {
                snapshot_seq: snapshot.seq,
                tail_start: snapshot.state.last_seq + 1,
            });
        }
        check_sequence(tail, snapshot.seq + 1)?;
        let mut state = snapshot.state;
        for record in tail {
            state.apply(record)?;
        }
        Ok(state)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            seq: self.last_seq,
            state: self.clone(),
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state always serializes")
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_ts(&self) -> Option<Timestamp> {
        self.last_ts
    }

    /// Profile for `id`; students never seen before have not consented.
    pub fn student(&self, id: &StudentId) -> StudentProfile {
        self.students
            .get(id)
            .cloned()
            .unwrap_or_else(|| StudentProfile::new(id.clone()))
    }

    pub fn requests(&self) -> impl Iterator<Item = &HelpRequest> {
        self.requests.values()
    }

    pub fn request(&self, id: &RequestId) -> Option<&HelpRequest> {
        self.requests.get(id)
    }

    pub fn hints(&self) -> impl Iterator<Item = &Hint> {
        self.hints.values()
    }

    pub fn hint(&self, id: &HintId) -> Option<&Hint> {
        self.hints.get(id)
    }

    pub fn hint_for_request(&self, id: &RequestId) -> Option<&Hint> {
        self.hint_by_request.get(id).and_then(|h| self.hints.get(h))
    }

    pub fn generation_failure(&self, id: &RequestId) -> Option<&str> {
        self.generation_failures.get(id).map(String::as_str)
    }

    pub fn escalations(&self) -> impl Iterator<Item = &Escalation> {
        self.escalations.values()
    }

    /// Escalations in enqueue order, which is also `created_at` order.
    pub fn escalations_in_queue_order(&self) -> impl Iterator<Item = &Escalation> {
        self.escalation_order
            .iter()
            .filter_map(|id| self.escalations.get(id))
    }

    pub fn escalation(&self, id: &EscalationId) -> Option<&Escalation> {
        self.escalations.get(id)
    }

    pub fn escalation_for_hint(&self, id: &HintId) -> Option<&Escalation> {
        self.escalation_by_hint
            .get(id)
            .and_then(|e| self.escalations.get(e))
    }

    pub fn feedback(&self) -> impl Iterator<Item = &InstructorFeedback> {
        self.feedback.values()
    }

    pub fn feedback_for_escalation(&self, id: &EscalationId) -> Option<&InstructorFeedback> {
        self.feedback_by_escalation
            .get(id)
            .and_then(|f| self.feedback.get(f))
    }

    pub fn annotations(&self) -> impl Iterator<Item = &AnnotatedCase> {
        self.annotations.values()
    }

    pub fn annotation(&self, hint_id: &HintId) -> Option<&AnnotatedCase> {
        self.annotations.get(hint_id)
    }

    /// Earlier versions of re-annotated cases, oldest first.
    pub fn superseded_annotations(&self) -> &[AnnotatedCase] {
        &self.superseded_annotations
    }

    pub fn activities(&self) -> &[ActivityPayload] {
        &self.activities
    }

    /// The request an escalation ultimately belongs to.
    pub fn request_for_escalation(&self, escalation: &Escalation) -> Option<&HelpRequest> {
        self.hints
            .get(&escalation.hint_id)
            .and_then(|h| self.requests.get(&h.request_id))
    }

    pub fn funnel_counts(&self) -> FunnelCounts {
        FunnelCounts {
            requests: self.requests.len(),
            delivered: self.hints.len(),
            rated_unhelpful: self
                .hints
                .values()
                .filter(|h| h.rating == Some(Rating::Unhelpful))
                .count(),
            escalations: self.escalations.len(),
        }
    }

    /// Drops every lease. Used on startup: claims do not survive a restart.
    pub fn clear_leases(&mut self) {
        for escalation in self.escalations.values_mut() {
            escalation.claimed_by = None;
            escalation.claim_expires_at = None;
        }
    }

    /// Folds one record in. Either the whole record applies or nothing
    /// changes.
    pub fn apply(&mut self, record: &EventRecord) -> Result<()> {
        if record.seq != self.last_seq + 1 {
            return Err(Error::corrupt(
                record.seq,
                format!("expected sequence number {}", self.last_seq + 1),
            ));
        }
        if self.last_ts.is_some_and(|last| record.ts < last) {
            return Err(Error::corrupt(record.seq, "timestamp moves backwards"));
        }
        self.apply_body(record.ts, &record.body)
            .map_err(|reason| Error::corrupt(record.seq, reason))?;
        self.last_seq = record.seq;
        self.last_ts = Some(record.ts);
        Ok(())
    }

    fn transitioned(
        &self,
        request_id: &RequestId,
        event: LifecycleEvent,
    ) -> Result<HelpRequest, String> {
        let request = self
            .requests
            .get(request_id)
            .ok_or_else(|| format!("unknown request {request_id}"))?;
        apply_transition(request, event).map_err(|e| e.to_string())
    }

    fn apply_body(&mut self, ts: Timestamp, body: &EventBody) -> Result<(), String> {
        match body {
            EventBody::ConsentGiven { student_id } => {
                let profile = self.student(student_id).record_consent(ts);
                self.students.insert(student_id.clone(), profile);
            }
            EventBody::RequestCreated { request } => {
                if self.requests.contains_key(&request.request_id) {
                    return Err(format!("duplicate request {}", request.request_id));
                }
                if request.state != RequestState::Created {
                    return Err("new requests start in the created state".into());
                }
                if !self.student(&request.student_id).consent_given() {
                    return Err(format!("student {} has not consented", request.student_id));
                }
                self.requests
                    .insert(request.request_id.clone(), request.clone());
            }
            EventBody::GenerationStarted { request_id } => {
                let next = self.transitioned(request_id, LifecycleEvent::StartGeneration)?;
                self.requests.insert(request_id.clone(), next);
            }
            EventBody::HintDelivered { hint } => {
                if self.hints.contains_key(&hint.hint_id) {
                    return Err(format!("duplicate hint {}", hint.hint_id));
                }
                if hint.rating.is_some() {
                    return Err("hints are delivered unrated".into());
                }
                let next = self.transitioned(&hint.request_id, LifecycleEvent::Deliver)?;
                self.requests.insert(hint.request_id.clone(), next);
                self.hint_by_request
                    .insert(hint.request_id.clone(), hint.hint_id.clone());
                self.hints.insert(hint.hint_id.clone(), hint.clone());
            }
            EventBody::GenerationFailed { request_id, reason } => {
                let next = self.transitioned(request_id, LifecycleEvent::Fail)?;
                self.requests.insert(request_id.clone(), next);
                self.generation_failures
                    .insert(request_id.clone(), reason.clone());
            }
            EventBody::HintRated { hint_id, rating } => {
                let hint = self
                    .hints
                    .get(hint_id)
                    .ok_or_else(|| format!("unknown hint {hint_id}"))?;
                let request = self
                    .requests
                    .get(&hint.request_id)
                    .ok_or_else(|| format!("unknown request {}", hint.request_id))?;
                let (hint, request) =
                    rate_hint(hint, request, *rating).map_err(|e| e.to_string())?;
                self.requests.insert(request.request_id.clone(), request);
                self.hints.insert(hint.hint_id.clone(), hint);
            }
            EventBody::Escalated { escalation } => {
                if self.escalations.contains_key(&escalation.escalation_id) {
                    return Err(format!("duplicate escalation {}", escalation.escalation_id));
                }
                if self.escalation_by_hint.contains_key(&escalation.hint_id) {
                    return Err(format!("hint {} already escalated", escalation.hint_id));
                }
                if escalation.status != EscalationStatus::Pending {
                    return Err("new escalations start pending".into());
                }
                let hint = self
                    .hints
                    .get(&escalation.hint_id)
                    .ok_or_else(|| format!("unknown hint {}", escalation.hint_id))?;
                if hint.rating != Some(Rating::Unhelpful) {
                    return Err("only unhelpful hints can be escalated".into());
                }
                let request_id = hint.request_id.clone();
                let next = self.transitioned(&request_id, LifecycleEvent::Escalate)?;
                self.requests.insert(request_id, next);
                self.escalation_by_hint
                    .insert(escalation.hint_id.clone(), escalation.escalation_id.clone());
                self.escalation_order.push(escalation.escalation_id.clone());
                self.escalations
                    .insert(escalation.escalation_id.clone(), escalation.clone());
            }
            EventBody::EscalationViewed { escalation_id, .. } => {
                let escalation = self.known_escalation(escalation_id)?;
                if escalation.status != EscalationStatus::Pending {
                    return Err(format!("escalation {escalation_id} was already viewed"));
                }
                let request_id = self.request_id_for(escalation)?;
                let next = self.transitioned(&request_id, LifecycleEvent::InstructorView)?;
                self.requests.insert(request_id, next);
                let escalation = self.escalations.get_mut(escalation_id).unwrap();
                escalation.status = EscalationStatus::Viewed;
                escalation.viewed_at = Some(ts);
            }
            EventBody::LeaseAcquired {
                escalation_id,
                instructor_id,
                expires_at,
            } => {
                let escalation = self.known_escalation(escalation_id)?;
                if !escalation.is_unresolved() {
                    return Err(format!("escalation {escalation_id} is resolved"));
                }
                if let Some(holder) = escalation.active_claim(ts) {
                    if holder != instructor_id {
                        return Err(format!("escalation {escalation_id} is leased by {holder}"));
                    }
                }
                let escalation = self.escalations.get_mut(escalation_id).unwrap();
                escalation.claimed_by = Some(instructor_id.clone());
                escalation.claim_expires_at = Some(*expires_at);
            }
            EventBody::LeaseReleased {
                escalation_id,
                instructor_id,
            } => {
                let escalation = self.known_escalation(escalation_id)?;
                if escalation.claimed_by.as_ref() != Some(instructor_id) {
                    return Err(format!("{instructor_id} holds no lease on {escalation_id}"));
                }
                let escalation = self.escalations.get_mut(escalation_id).unwrap();
                escalation.claimed_by = None;
                escalation.claim_expires_at = None;
            }
            EventBody::FeedbackSubmitted { feedback } => {
                if self.feedback.contains_key(&feedback.feedback_id) {
                    return Err(format!("duplicate feedback {}", feedback.feedback_id));
                }
                if feedback.text.trim().is_empty() {
                    return Err("empty feedback".into());
                }
                let escalation = self.known_escalation(&feedback.escalation_id)?;
                if escalation.status != EscalationStatus::Viewed {
                    return Err(format!(
                        "escalation {} is not awaiting feedback",
                        feedback.escalation_id
                    ));
                }
                if escalation.active_claim(ts) != Some(&feedback.instructor_id) {
                    return Err(format!(
                        "{} does not hold the lease on {}",
                        feedback.instructor_id, feedback.escalation_id
                    ));
                }
                let request_id = self.request_id_for(escalation)?;
                let next = self.transitioned(&request_id, LifecycleEvent::Resolve)?;
                self.requests.insert(request_id, next);
                let escalation = self.escalations.get_mut(&feedback.escalation_id).unwrap();
                escalation.status = EscalationStatus::Resolved;
                escalation.resolved_at = Some(ts);
                escalation.claimed_by = None;
                escalation.claim_expires_at = None;
                self.feedback_by_escalation
                    .insert(feedback.escalation_id.clone(), feedback.feedback_id.clone());
                self.feedback
                    .insert(feedback.feedback_id.clone(), feedback.clone());
            }
            EventBody::ActivityObserved(activity) => {
                self.activities.push(activity.clone());
            }
            EventBody::CaseAnnotated { case } => {
                let hint = self
                    .hints
                    .get(&case.hint_id)
                    .ok_or_else(|| format!("unknown hint {}", case.hint_id))?;
                let escalated = self.escalation_by_hint.get(&case.hint_id);
                if case.escalation_id.as_ref() != escalated {
                    return Err(format!(
                        "annotation of {} names the wrong escalation",
                        case.hint_id
                    ));
                }
                if hint.rating == Some(Rating::Unhelpful) && case.unhelpful_reasons.is_empty() {
                    return Err("unhelpful cases need at least one reason".into());
                }
                if let Some(previous) = self.annotations.insert(case.hint_id.clone(), case.clone())
                {
                    self.superseded_annotations.push(previous);
                }
            }
        }
        Ok(())
    }

    fn known_escalation(&self, id: &EscalationId) -> Result<&Escalation, String> {
        self.escalations
            .get(id)
            .ok_or_else(|| format!("unknown escalation {id}"))
    }

    fn request_id_for(&self, escalation: &Escalation) -> Result<RequestId, String> {
        self.hints
            .get(&escalation.hint_id)
            .map(|h| h.request_id.clone())
            .ok_or_else(|| format!("unknown hint {}", escalation.hint_id))
    }
}

pub fn write_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>) -> Result<()> {
    let bytes = serde_json::to_vec(snapshot).expect("snapshots always serialize");
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(Error::StorageFailure)
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(Error::StorageFailure)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::corrupt(0, format!("bad snapshot: {e}")))
}
