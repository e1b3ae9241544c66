//! Random operation sequences for property tests.
//!
//! Operations name their targets by index into what the driver has seen
//! so far, so any generated sequence can run against any desk. Domain
//! errors are part of the exercise and are returned, not raised.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use chrono::TimeDelta;
use proptest::prelude::*;

use crate::desk::{DeskConfig, HelpDesk};
use crate::error::Result;
use crate::ids::{
    EscalationId, HintId, InstructorId, QuestionId, RequestId, SequentialIds, StudentId,
};
use crate::log::MemoryLog;
use crate::model::{ActivityKind, ActivityPayload, HintType, Rating, RequestState};
use crate::quota::RequestDraft;
use crate::state::ServiceState;
use crate::taxonomy::{AnnotationTarget, BugType, FeedbackQuality, UnhelpfulReason};
use crate::time::{Clock, ManualClock, Timestamp};

#[derive(Debug, Clone)]
pub enum Op {
    Consent {
        student: usize,
    },
    Request {
        student: usize,
        question: usize,
        hint_type: HintType,
        comment: bool,
    },
    Start {
        request: usize,
    },
    Deliver {
        request: usize,
        latency_ms: u64,
    },
    Fail {
        request: usize,
    },
    Rate {
        hint: usize,
        rating: Rating,
    },
    Escalate {
        hint: usize,
        note: bool,
    },
    Serve {
        instructor: usize,
    },
    Feedback {
        instructor: usize,
        escalation: usize,
        empty: bool,
    },
    Release {
        instructor: usize,
        escalation: usize,
    },
    Activity {
        student: usize,
        question: usize,
        kind: ActivityKind,
    },
    Annotate {
        hint: usize,
        incorrect: bool,
        high_quality: bool,
    },
    Advance {
        minutes: i64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct SimShape {
    pub students: usize,
    pub questions: usize,
    pub instructors: usize,
}

impl Default for SimShape {
    fn default() -> Self {
        Self {
            students: 3,
            questions: 2,
            instructors: 3,
        }
    }
}

fn hint_type() -> impl Strategy<Value = HintType> {
    prop_oneof![
        Just(HintType::Planning),
        Just(HintType::Debugging),
        Just(HintType::Optimization)
    ]
}

fn activity_kind() -> impl Strategy<Value = ActivityKind> {
    prop_oneof![
        Just(ActivityKind::Coding),
        Just(ActivityKind::VideoWatch),
        Just(ActivityKind::HintRequest),
        Just(ActivityKind::QuestionSolved)
    ]
}

/// One random operation, possibly aimed at an arbitrary target rather
/// than an eligible one.
pub fn op(shape: SimShape) -> impl Strategy<Value = (Op, bool)> {
    (lifecycle_op(shape), prop::bool::weighted(0.1))
}

/// Weighted towards moving requests along the lifecycle so that
/// escalations actually happen.
fn lifecycle_op(shape: SimShape) -> impl Strategy<Value = Op> {
    let s = shape.students;
    let q = shape.questions;
    let i = shape.instructors;
    prop_oneof![
        2 => (0..s).prop_map(|student| Op::Consent { student }),
        4 => (0..s, 0..q, hint_type(), any::<bool>()).prop_map(|(student, question, hint_type, comment)| {
            Op::Request { student, question, hint_type, comment }
        }),
        3 => (0..64usize).prop_map(|request| Op::Start { request }),
        3 => (0..64usize, 1u64..60_000).prop_map(|(request, latency_ms)| Op::Deliver { request, latency_ms }),
        1 => (0..64usize).prop_map(|request| Op::Fail { request }),
        3 => (0..64usize, prop_oneof![1 => Just(Rating::Helpful), 2 => Just(Rating::Unhelpful)])
            .prop_map(|(hint, rating)| Op::Rate { hint, rating }),
        3 => (0..64usize, any::<bool>()).prop_map(|(hint, note)| Op::Escalate { hint, note }),
        3 => (0..i).prop_map(|instructor| Op::Serve { instructor }),
        2 => (0..i, 0..64usize, prop::bool::weighted(0.1))
            .prop_map(|(instructor, escalation, empty)| Op::Feedback { instructor, escalation, empty }),
        1 => (0..i, 0..64usize).prop_map(|(instructor, escalation)| Op::Release { instructor, escalation }),
        1 => (0..s, 0..q, activity_kind()).prop_map(|(student, question, kind)| Op::Activity { student, question, kind }),
        1 => (0..64usize, any::<bool>(), any::<bool>())
            .prop_map(|(hint, incorrect, high_quality)| Op::Annotate { hint, incorrect, high_quality }),
        2 => (0i64..90).prop_map(|minutes| Op::Advance { minutes }),
    ]
}

pub fn ops(shape: SimShape, max_len: usize) -> impl Strategy<Value = Vec<(Op, bool)>> {
    prop::collection::vec(op(shape), max_len / 2..max_len)
}

/// Drives a desk with generated operations.
pub struct Simulation {
    pub desk: HelpDesk,
    pub log: MemoryLog,
    pub clock: Arc<ManualClock>,
    pub students: Vec<StudentId>,
    pub questions: Vec<QuestionId>,
    pub instructors: Vec<InstructorId>,
    pub requests: Vec<RequestId>,
    pub hints: Vec<HintId>,
    pub escalations: Vec<EscalationId>,
}

pub fn epoch() -> Timestamp {
    "2025-01-06T08:00:00Z".parse().unwrap()
}

impl Simulation {
    pub fn new(shape: SimShape) -> Self {
        Self::with_students(
            (0..shape.students)
                .map(|n| StudentId::new(format!("student-{n}")))
                .collect(),
            shape,
        )
    }

    pub fn with_students(students: Vec<StudentId>, shape: SimShape) -> Self {
        let clock = Arc::new(ManualClock::new(epoch()));
        let (desk, log) = HelpDesk::in_memory(
            DeskConfig::default(),
            clock.clone(),
            Arc::new(SequentialIds::new()),
        );
        Self {
            desk,
            log,
            clock,
            students,
            questions: (0..shape.questions)
                .map(|n| QuestionId::new(format!("q{n}")))
                .collect(),
            instructors: (0..shape.instructors)
                .map(|n| InstructorId::new(format!("instructor-{n}")))
                .collect(),
            requests: Vec::new(),
            hints: Vec::new(),
            escalations: Vec::new(),
        }
    }

    fn pick<T: Clone>(items: &[T], index: usize) -> Option<T> {
        (!items.is_empty()).then(|| items[index % items.len()].clone())
    }

    /// Picks from `eligible` unless the step is stray or nothing is
    /// eligible, in which case any known item may be hit.
    fn target<T: Clone>(all: &[T], eligible: Vec<T>, index: usize, stray: bool) -> Option<T> {
        if stray || eligible.is_empty() {
            Self::pick(all, index)
        } else {
            Self::pick(&eligible, index)
        }
    }

    fn requests_in(&self, state: RequestState) -> Vec<RequestId> {
        self.desk.read(|s| {
            self.requests
                .iter()
                .filter(|id| s.request(id).is_some_and(|r| r.state == state))
                .cloned()
                .collect()
        })
    }

    fn hints_where(&self, keep: impl Fn(&ServiceState, &HintId) -> bool) -> Vec<HintId> {
        self.desk.read(|s| {
            self.hints
                .iter()
                .filter(|id| keep(s, id))
                .cloned()
                .collect()
        })
    }

    fn held_escalations(&self) -> Vec<(EscalationId, InstructorId)> {
        let now = self.clock.now();
        self.desk.read(|s| {
            self.escalations
                .iter()
                .filter_map(|id| {
                    let holder = s.escalation(id)?.active_claim(now)?;
                    Some((id.clone(), holder.clone()))
                })
                .collect()
        })
    }

    /// Runs one generated step.
    pub fn step(&mut self, step: &(Op, bool)) -> Result<bool> {
        self.apply(&step.0, step.1)
    }

    /// Applies one operation. `Ok(false)` means there was nothing to act
    /// on; domain refusals come back as `Err`.
    pub fn apply(&mut self, op: &Op, stray: bool) -> Result<bool> {
        // Every operation takes a little time.
        self.clock.advance(TimeDelta::seconds(1));
        match *op {
            Op::Consent { student } => {
                self.desk
                    .record_consent(&self.students[student % self.students.len()])?;
            }
            Op::Request {
                student,
                question,
                hint_type,
                comment,
            } => {
                let consented: Vec<StudentId> = self.desk.read(|s| {
                    self.students
                        .iter()
                        .filter(|id| s.student(id).consent_given())
                        .cloned()
                        .collect()
                });
                let Some(student) = Self::target(&self.students, consented, student, stray) else {
                    return Ok(false);
                };
                let student = &student;
                let question = self.questions[question % self.questions.len()].clone();
                let draft = RequestDraft {
                    assignment_id: format!("a-{}", question.as_str()).into(),
                    question_id: question,
                    hint_type,
                    comment: comment.then(|| "my loop never ends".to_owned()),
                    code: "for i in range(3):\n    print(i)\n".into(),
                };
                let request = self.desk.create_help_request(student, draft)?;
                self.requests.push(request.request_id);
            }
            Op::Start { request } => {
                let eligible = self.requests_in(RequestState::Created);
                let Some(id) = Self::target(&self.requests, eligible, request, stray) else {
                    return Ok(false);
                };
                self.desk.start_generation(&id)?;
            }
            Op::Deliver {
                request,
                latency_ms,
            } => {
                let mut eligible = self.requests_in(RequestState::Generating);
                if eligible.is_empty() && !stray {
                    // Nothing generating yet: start a fresh request first.
                    if let Some(id) = Self::pick(&self.requests_in(RequestState::Created), request)
                    {
                        self.desk.start_generation(&id)?;
                        eligible.push(id);
                    }
                }
                let Some(id) = Self::target(&self.requests, eligible, request, stray) else {
                    return Ok(false);
                };
                let hint = self.desk.deliver_hint(
                    &id,
                    "Check the loop bound.",
                    Duration::from_millis(latency_ms),
                )?;
                self.hints.push(hint.hint_id);
            }
            Op::Fail { request } => {
                let eligible = self.requests_in(RequestState::Generating);
                let Some(id) = Self::target(&self.requests, eligible, request, stray) else {
                    return Ok(false);
                };
                self.desk.fail_generation(&id, "provider error")?;
            }
            Op::Rate { hint, rating } => {
                let eligible =
                    self.hints_where(|s, id| s.hint(id).is_some_and(|h| h.rating.is_none()));
                let Some(id) = Self::target(&self.hints, eligible, hint, stray) else {
                    return Ok(false);
                };
                let owner = self.owner_of(&id);
                self.desk.rate_hint(&owner, &id, rating)?;
            }
            Op::Escalate { hint, note } => {
                let eligible = self.hints_where(|s, id| {
                    s.hint(id)
                        .is_some_and(|h| h.rating == Some(Rating::Unhelpful))
                        && s.escalation_for_hint(id).is_none()
                });
                let Some(id) = Self::target(&self.hints, eligible, hint, stray) else {
                    return Ok(false);
                };
                let owner = self.owner_of(&id);
                let escalation = self.desk.escalate(
                    &owner,
                    &id,
                    note.then(|| "The hint points at the wrong line.".to_owned()),
                )?;
                self.escalations.push(escalation.escalation_id);
            }
            Op::Serve { instructor } => {
                let instructor = &self.instructors[instructor % self.instructors.len()];
                return Ok(self.desk.next_unresolved(instructor)?.is_some());
            }
            Op::Feedback {
                instructor,
                escalation,
                empty,
            } => {
                if !stray && self.held_escalations().is_empty() {
                    // Claim something first so feedback has a target.
                    self.desk
                        .next_unresolved(&self.instructors[instructor % self.instructors.len()])?;
                }
                let (id, holder) = match (stray, Self::pick(&self.held_escalations(), escalation)) {
                    (false, Some(held)) => held,
                    _ => {
                        let Some(id) = Self::pick(&self.escalations, escalation) else {
                            return Ok(false);
                        };
                        (
                            id,
                            self.instructors[instructor % self.instructors.len()].clone(),
                        )
                    }
                };
                let text = if empty {
                    "  "
                } else {
                    "Anchor your regex with ^ and $."
                };
                self.desk.submit_feedback(&holder, &id, text)?;
            }
            Op::Release {
                instructor,
                escalation,
            } => {
                let (id, holder) = match (stray, Self::pick(&self.held_escalations(), escalation)) {
                    (false, Some(held)) => held,
                    _ => {
                        let Some(id) = Self::pick(&self.escalations, escalation) else {
                            return Ok(false);
                        };
                        (
                            id,
                            self.instructors[instructor % self.instructors.len()].clone(),
                        )
                    }
                };
                self.desk.release_claim(&holder, &id)?;
            }
            Op::Activity {
                student,
                question,
                kind,
            } => {
                let activity = ActivityPayload {
                    student_id: self.students[student % self.students.len()].clone(),
                    question_id: self.questions[question % self.questions.len()].clone(),
                    activity: kind,
                    at: self.clock.now(),
                };
                self.desk.record_activity(activity)?;
            }
            Op::Annotate {
                hint,
                incorrect,
                high_quality,
            } => {
                let eligible =
                    self.hints_where(|s, id| s.hint(id).is_some_and(|h| h.rating.is_some()));
                let Some(id) = Self::target(&self.hints, eligible, hint, stray) else {
                    return Ok(false);
                };
                let reasons: BTreeSet<_> = if incorrect {
                    [UnhelpfulReason::Incorrect].into()
                } else {
                    [UnhelpfulReason::Misfocused].into()
                };
                let escalated = self.desk.read(|s| s.escalation_for_hint(&id).is_some());
                let quality = escalated.then(|| {
                    if high_quality {
                        FeedbackQuality::high()
                    } else {
                        FeedbackQuality::low([UnhelpfulReason::Unclear]).unwrap()
                    }
                });
                self.desk.annotate(
                    &AnnotationTarget::Hint(id),
                    [BugType::SemanticBug].into(),
                    reasons,
                    quality,
                    "analyst",
                )?;
            }
            Op::Advance { minutes } => {
                self.clock.advance(TimeDelta::minutes(minutes));
            }
        }
        Ok(true)
    }

    fn owner_of(&self, hint: &HintId) -> StudentId {
        self.desk.read(|state| {
            let hint = state
                .hint(hint)
                .expect("driver only tracks delivered hints");
            state
                .request(&hint.request_id)
                .expect("hints have requests")
                .student_id
                .clone()
        })
    }
}
