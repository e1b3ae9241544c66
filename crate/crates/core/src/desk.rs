//! The write path. Every command runs under one lock: validate against
//! the current state, append the resulting events, then fold them in.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::Duration;

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventBody, EventRecord};
use crate::ids::{
    EscalationId, HintId, IdGenerator, IdKind, InstructorId, QuestionId, RequestId, StudentId,
};
use crate::lifecycle;
use crate::log::{EventLog, FileLog, MemoryLog};
use crate::model::{
    ActivityPayload, Escalation, EscalationStatus, HelpRequest, Hint, HintType, InstructorFeedback,
    QuotaPolicy, Rating, RequestState, StudentProfile,
};
use crate::queue::{self, EscalationContext};
use crate::quota::{self, RemainingQuota, RequestDraft};
use crate::state::ServiceState;
use crate::taxonomy::{AnnotatedCase, AnnotationTarget, BugType, FeedbackQuality, UnhelpfulReason};
use crate::time::{Clock, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeskConfig {
    pub policy: QuotaPolicy,
    pub lease_duration: TimeDelta,
    /// Show students which instructor answered. Off by default.
    pub attribute_feedback: bool,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            policy: QuotaPolicy::default(),
            lease_duration: TimeDelta::minutes(30),
            attribute_feedback: false,
        }
    }
}

/// Task descriptions keyed by question.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskCatalog(BTreeMap<QuestionId, String>);

impl TaskCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, question: impl Into<QuestionId>, description: impl Into<String>) {
        self.0.insert(question.into(), description.into());
    }

    pub fn describe(&self, question: &QuestionId) -> &str {
        self.0.get(question).map(String::as_str).unwrap_or("")
    }
}

/// Sees every event right after it is durably appended.
pub trait EventObserver: Send + Sync {
    fn observe(&self, record: &EventRecord);
}

struct Inner {
    state: ServiceState,
    log: Box<dyn EventLog>,
}

pub struct HelpDesk {
    inner: Mutex<Inner>,
    config: DeskConfig,
    tasks: TaskCatalog,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdGenerator>,
    observers: RwLock<Vec<Arc<dyn EventObserver>>>,
}

impl HelpDesk {
    /// Builds a desk over `log`, whose existing contents are `existing`.
    /// Leases from before are dropped.
    pub fn new(
        log: Box<dyn EventLog>,
        existing: &[EventRecord],
        config: DeskConfig,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdGenerator>,
    ) -> Result<Self> {
        let mut state = ServiceState::replay(existing)?;
        state.clear_leases();
        Ok(Self {
            inner: Mutex::new(Inner { state, log }),
            config,
            tasks: TaskCatalog::new(),
            clock,
            ids,
            observers: RwLock::new(Vec::new()),
        })
    }

    pub fn open(
        path: impl AsRef<Path>,
        config: DeskConfig,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdGenerator>,
    ) -> Result<Self> {
        let (log, existing) = FileLog::open(path)?;
        Self::new(Box::new(log), &existing, config, clock, ids)
    }

    pub fn in_memory(
        config: DeskConfig,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdGenerator>,
    ) -> (Self, MemoryLog) {
        let log = MemoryLog::new();
        let desk = Self::new(Box::new(log.clone()), &[], config, clock, ids)
            .expect("an empty log always replays");
        (desk, log)
    }

    pub fn with_tasks(mut self, tasks: TaskCatalog) -> Self {
        self.tasks = tasks;
        self
    }

    pub fn add_observer(&self, observer: Arc<dyn EventObserver>) {
        self.observers.write().unwrap().push(observer);
    }

    pub fn config(&self) -> &DeskConfig {
        &self.config
    }

    pub fn tasks(&self) -> &TaskCatalog {
        &self.tasks
    }

    /// Runs `f` against a consistent view of the state.
    pub fn read<R>(&self, f: impl FnOnce(&ServiceState) -> R) -> R {
        f(&self.lock().state)
    }

    pub fn state(&self) -> ServiceState {
        self.read(Clone::clone)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Service time: never earlier than the last logged event.
    fn now(&self, state: &ServiceState) -> Timestamp {
        let now = self.clock.now();
        state.last_ts().map_or(now, |last| now.max(last))
    }

    fn mint<T: From<String>>(&self, kind: IdKind) -> T {
        T::from(self.ids.next_id(kind))
    }

    fn commit(&self, inner: &mut Inner, ts: Timestamp, bodies: Vec<EventBody>) -> Result<()> {
        if bodies.is_empty() {
            return Ok(());
        }
        let first = inner.state.last_seq() + 1;
        let records: Vec<EventRecord> = bodies
            .into_iter()
            .enumerate()
            .map(|(i, body)| EventRecord {
                seq: first + i as u64,
                ts,
                actor: body.actor(),
                body,
            })
            .collect();
        inner.log.append(&records)?;
        for record in &records {
            inner.state.apply(record)?;
        }
        let observers = self.observers.read().unwrap();
        for record in &records {
            for observer in observers.iter() {
                observer.observe(record);
            }
        }
        Ok(())
    }

    pub fn record_consent(&self, student_id: &StudentId) -> Result<StudentProfile> {
        let mut inner = self.lock();
        if !inner.state.student(student_id).consent_given() {
            let ts = self.now(&inner.state);
            let body = EventBody::ConsentGiven {
                student_id: student_id.clone(),
            };
            self.commit(&mut inner, ts, vec![body])?;
        }
        Ok(inner.state.student(student_id))
    }

    pub fn create_help_request(
        &self,
        student_id: &StudentId,
        draft: RequestDraft,
    ) -> Result<HelpRequest> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let student = inner.state.student(student_id);
        let request = quota::create_help_request(
            &student,
            draft,
            &self.config.policy,
            inner.state.requests(),
            self.mint(IdKind::Request),
            ts,
        )?;
        let body = EventBody::RequestCreated {
            request: request.clone(),
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(request)
    }

    pub fn start_generation(&self, request_id: &RequestId) -> Result<HelpRequest> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let request = known_request(&inner.state, request_id)?;
        let next = lifecycle::apply_transition(request, crate::LifecycleEvent::StartGeneration)?;
        let body = EventBody::GenerationStarted {
            request_id: request_id.clone(),
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(next)
    }

    pub fn deliver_hint(
        &self,
        request_id: &RequestId,
        text: impl Into<String>,
        generation_latency: Duration,
    ) -> Result<Hint> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let request = known_request(&inner.state, request_id)?;
        lifecycle::apply_transition(request, crate::LifecycleEvent::Deliver)?;
        let hint = Hint {
            hint_id: self.mint(IdKind::Hint),
            request_id: request_id.clone(),
            text: text.into(),
            generated_at: ts,
            generation_latency,
            rating: None,
        };
        let body = EventBody::HintDelivered { hint: hint.clone() };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(hint)
    }

    /// Marks generation as failed; the quota slot is released.
    pub fn fail_generation(
        &self,
        request_id: &RequestId,
        reason: impl Into<String>,
    ) -> Result<HelpRequest> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let request = known_request(&inner.state, request_id)?;
        let next = lifecycle::apply_transition(request, crate::LifecycleEvent::Fail)?;
        let body = EventBody::GenerationFailed {
            request_id: request_id.clone(),
            reason: reason.into(),
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(next)
    }

    /// Fails every request left mid-generation, e.g. by a crash. Returns
    /// the ids that were failed.
    pub fn recover_interrupted(&self) -> Result<Vec<RequestId>> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let mut bodies = Vec::new();
        let mut failed = Vec::new();
        for request in inner.state.requests() {
            if !request.state.is_in_flight() {
                continue;
            }
            if request.state == RequestState::Created {
                bodies.push(EventBody::GenerationStarted {
                    request_id: request.request_id.clone(),
                });
            }
            bodies.push(EventBody::GenerationFailed {
                request_id: request.request_id.clone(),
                reason: "interrupted by service restart".into(),
            });
            failed.push(request.request_id.clone());
        }
        self.commit(&mut inner, ts, bodies)?;
        Ok(failed)
    }

    pub fn rate_hint(
        &self,
        student_id: &StudentId,
        hint_id: &HintId,
        rating: Rating,
    ) -> Result<Hint> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let (hint, request) = owned_hint(&inner.state, student_id, hint_id)?;
        let (rated, _) = lifecycle::rate_hint(hint, request, rating)?;
        let body = EventBody::HintRated {
            hint_id: hint_id.clone(),
            rating,
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(rated)
    }

    /// Forwards an unhelpful hint to the instructor queue.
    pub fn escalate(
        &self,
        student_id: &StudentId,
        hint_id: &HintId,
        note: Option<String>,
    ) -> Result<Escalation> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let (hint, request) = owned_hint(&inner.state, student_id, hint_id)?;
        if inner.state.escalation_for_hint(hint_id).is_some() {
            return Err(Error::DuplicateEscalation);
        }
        if hint.rating != Some(Rating::Unhelpful) {
            return Err(Error::NotUnhelpful);
        }
        lifecycle::apply_transition(request, crate::LifecycleEvent::Escalate)?;
        let escalation = Escalation {
            escalation_id: self.mint(IdKind::Escalation),
            hint_id: hint_id.clone(),
            anonymous_token: self.mint(IdKind::Anonymous),
            student_note: note.filter(|n| !n.trim().is_empty()),
            created_at: ts,
            status: EscalationStatus::Pending,
            viewed_at: None,
            resolved_at: None,
            claimed_by: None,
            claim_expires_at: None,
        };
        let body = EventBody::Escalated {
            escalation: escalation.clone(),
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(escalation)
    }

    /// Serves the oldest unresolved escalation this instructor may take and
    /// leases it to them. The first serve marks it viewed.
    pub fn next_unresolved(
        &self,
        instructor_id: &InstructorId,
    ) -> Result<Option<EscalationContext>> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let Some(escalation) = queue::next_available(&inner.state, instructor_id, ts) else {
            return Ok(None);
        };
        let escalation_id = escalation.escalation_id.clone();
        let mut bodies = Vec::new();
        if escalation.status == EscalationStatus::Pending {
            bodies.push(EventBody::EscalationViewed {
                escalation_id: escalation_id.clone(),
                instructor_id: instructor_id.clone(),
            });
        }
        bodies.push(EventBody::LeaseAcquired {
            escalation_id: escalation_id.clone(),
            instructor_id: instructor_id.clone(),
            expires_at: ts.plus(self.config.lease_duration),
        });
        self.commit(&mut inner, ts, bodies)?;
        let escalation = inner.state.escalation(&escalation_id).expect("just leased");
        let request = inner
            .state
            .request_for_escalation(escalation)
            .expect("escalations always have a request");
        let task = self.tasks.describe(&request.question_id);
        Ok(queue::build_context(&inner.state, escalation, task))
    }

    pub fn submit_feedback(
        &self,
        instructor_id: &InstructorId,
        escalation_id: &EscalationId,
        text: &str,
    ) -> Result<InstructorFeedback> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let escalation = inner
            .state
            .escalation(escalation_id)
            .ok_or_else(|| Error::UnknownEscalation(escalation_id.to_string()))?;
        if escalation.status == EscalationStatus::Resolved {
            return Err(Error::AlreadyResolved);
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::EmptyFeedback);
        }
        queue::ensure_lease_holder(escalation, instructor_id, ts)?;
        let feedback = InstructorFeedback {
            feedback_id: self.mint(IdKind::Feedback),
            escalation_id: escalation_id.clone(),
            instructor_id: instructor_id.clone(),
            text: text.to_owned(),
            created_at: ts,
        };
        let body = EventBody::FeedbackSubmitted {
            feedback: feedback.clone(),
        };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(feedback)
    }

    /// Gives the escalation back to the queue; it stays viewed.
    pub fn release_claim(
        &self,
        instructor_id: &InstructorId,
        escalation_id: &EscalationId,
    ) -> Result<()> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let escalation = inner
            .state
            .escalation(escalation_id)
            .ok_or_else(|| Error::UnknownEscalation(escalation_id.to_string()))?;
        queue::ensure_lease_holder(escalation, instructor_id, ts)?;
        let body = EventBody::LeaseReleased {
            escalation_id: escalation_id.clone(),
            instructor_id: instructor_id.clone(),
        };
        self.commit(&mut inner, ts, vec![body])
    }

    pub fn record_activity(&self, activity: ActivityPayload) -> Result<()> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        self.commit(&mut inner, ts, vec![EventBody::ActivityObserved(activity)])
    }

    /// Stores (or replaces) the manual labels for one case.
    pub fn annotate(
        &self,
        target: &AnnotationTarget,
        bug_types: BTreeSet<BugType>,
        unhelpful_reasons: BTreeSet<UnhelpfulReason>,
        feedback_quality: Option<FeedbackQuality>,
        annotator: &str,
    ) -> Result<AnnotatedCase> {
        let mut inner = self.lock();
        let ts = self.now(&inner.state);
        let state = &inner.state;
        let (hint, escalation_id) = match target {
            AnnotationTarget::Escalation(id) => {
                let escalation = state
                    .escalation(id)
                    .ok_or_else(|| Error::UnknownEscalation(id.to_string()))?;
                let hint = state
                    .hint(&escalation.hint_id)
                    .ok_or_else(|| Error::UnknownHint(escalation.hint_id.to_string()))?;
                (hint, Some(id.clone()))
            }
            AnnotationTarget::Hint(id) => {
                let hint = state
                    .hint(id)
                    .ok_or_else(|| Error::UnknownHint(id.to_string()))?;
                let escalation = state
                    .escalation_for_hint(id)
                    .map(|e| e.escalation_id.clone());
                (hint, escalation)
            }
        };
        if hint.rating == Some(Rating::Unhelpful) && unhelpful_reasons.is_empty() {
            return Err(Error::EmptyReasonSet);
        }
        let case = AnnotatedCase {
            hint_id: hint.hint_id.clone(),
            escalation_id,
            bug_types,
            unhelpful_reasons,
            feedback_quality,
            annotator: annotator.to_owned(),
            annotated_at: ts,
        };
        let body = EventBody::CaseAnnotated { case: case.clone() };
        self.commit(&mut inner, ts, vec![body])?;
        Ok(case)
    }

    pub fn remaining_quota(
        &self,
        student_id: &StudentId,
        question_id: &QuestionId,
    ) -> RemainingQuota {
        self.read(|state| {
            quota::remaining_quota(
                student_id,
                question_id,
                &self.config.policy,
                state.requests(),
            )
        })
    }

    /// A student's own request, or `None` if it belongs to someone else.
    pub fn request_for_student(
        &self,
        student_id: &StudentId,
        request_id: &RequestId,
    ) -> Option<HelpRequest> {
        self.read(|state| {
            state
                .request(request_id)
                .filter(|r| &r.student_id == student_id)
                .cloned()
        })
    }

    /// Everything a student's hint panel shows for one question.
    pub fn student_hints(
        &self,
        student_id: &StudentId,
        question_id: &QuestionId,
    ) -> StudentHintView {
        self.read(|state| {
            let mut entries: Vec<StudentHintEntry> = state
                .requests()
                .filter(|r| &r.student_id == student_id && &r.question_id == question_id)
                .map(|r| self.entry_for(state, r))
                .collect();
            entries.sort_by(|a, b| {
                a.created_at
                    .cmp(&b.created_at)
                    .then(a.request_id.cmp(&b.request_id))
            });
            StudentHintView {
                question_id: question_id.clone(),
                consent_given: state.student(student_id).consent_given(),
                remaining: quota::remaining_quota(
                    student_id,
                    question_id,
                    &self.config.policy,
                    state.requests(),
                ),
                entries,
            }
        })
    }

    fn entry_for(&self, state: &ServiceState, request: &HelpRequest) -> StudentHintEntry {
        let hint = state.hint_for_request(&request.request_id);
        let escalation = hint.and_then(|h| state.escalation_for_hint(&h.hint_id));
        let feedback = escalation.and_then(|e| state.feedback_for_escalation(&e.escalation_id));
        StudentHintEntry {
            request_id: request.request_id.clone(),
            hint_type: request.hint_type,
            state: request.state,
            created_at: request.created_at,
            student_comment: request.student_comment.clone(),
            failure: state
                .generation_failure(&request.request_id)
                .map(str::to_owned),
            hint: hint.map(|h| HintSummary {
                hint_id: h.hint_id.clone(),
                text: h.text.clone(),
                rating: h.rating,
                generated_at: h.generated_at,
            }),
            escalation: escalation.map(|e| EscalationSummary {
                escalation_id: e.escalation_id.clone(),
                status: e.status,
                student_note: e.student_note.clone(),
                created_at: e.created_at,
            }),
            feedback: feedback.map(|f| FeedbackSummary {
                text: f.text.clone(),
                created_at: f.created_at,
                instructor_id: self
                    .config
                    .attribute_feedback
                    .then(|| f.instructor_id.clone()),
            }),
        }
    }
}

fn known_request<'a>(state: &'a ServiceState, id: &RequestId) -> Result<&'a HelpRequest> {
    state
        .request(id)
        .ok_or_else(|| Error::UnknownRequest(id.to_string()))
}

/// The hint and its request, provided the student owns them. Hints of
/// other students look unknown.
fn owned_hint<'a>(
    state: &'a ServiceState,
    student_id: &StudentId,
    hint_id: &HintId,
) -> Result<(&'a Hint, &'a HelpRequest)> {
    let unknown = || Error::UnknownHint(hint_id.to_string());
    let hint = state.hint(hint_id).ok_or_else(unknown)?;
    let request = state.request(&hint.request_id).ok_or_else(unknown)?;
    if &request.student_id != student_id {
        return Err(unknown());
    }
    Ok((hint, request))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentHintView {
    pub question_id: QuestionId,
    pub consent_given: bool,
    pub remaining: RemainingQuota,
    pub entries: Vec<StudentHintEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentHintEntry {
    pub request_id: RequestId,
    pub hint_type: HintType,
    pub state: RequestState,
    pub created_at: Timestamp,
    pub student_comment: Option<String>,
    pub failure: Option<String>,
    pub hint: Option<HintSummary>,
    pub escalation: Option<EscalationSummary>,
    pub feedback: Option<FeedbackSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintSummary {
    pub hint_id: HintId,
    pub text: String,
    pub rating: Option<Rating>,
    pub generated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationSummary {
    pub escalation_id: EscalationId,
    pub status: EscalationStatus,
    pub student_note: Option<String>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    pub text: String,
    pub created_at: Timestamp,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instructor_id: Option<InstructorId>,
}
