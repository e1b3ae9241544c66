//! A synthetic four-week deployment whose aggregates match the published
//! classroom numbers: 673 hints from 71 students, 146 rated unhelpful, 16
//! debugging escalations from 9 students, and 46 annotated cases.
//!
//! The log is produced by driving a real desk with a manual clock, so it
//! obeys every rule the service enforces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use hintdesk_core::{
    ActivityKind, ActivityPayload, AnnotationTarget, BugType, DeskConfig, EscalationId,
    EventRecord, FeedbackQuality, HelpDesk, HintId, HintType, InstructorId, ManualClock,
    QuestionId, Rating, RequestDraft, SequentialIds, StudentId, Timestamp, UnhelpfulReason,
};

const MINUTE: i64 = 60_000;
const HOUR: i64 = 60 * MINUTE;
const DAY: i64 = 24 * HOUR;

const QUESTIONS_PER_ASSIGNMENT: [usize; 4] = [3, 3, 4, 4];
/// Delivered hints per assignment as (planning, debugging, optimization).
const HINTS_PER_ASSIGNMENT: [[usize; 3]; 4] =
    [[25, 60, 16], [28, 97, 25], [32, 140, 28], [35, 153, 34]];
/// Unhelpful ratings per type as (planning, debugging, optimization).
const UNHELPFUL: [usize; 3] = [15, 117, 14];
const STUDENTS: usize = 71;
/// Indices of the students who escalate.
const ESCALATORS: [usize; 9] = [4, 11, 17, 23, 30, 38, 45, 52, 60];

/// Per escalation, in time order.
const STORY_ASSIGNMENT: [usize; 16] = [0, 0, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3];
const STORY_ESCALATOR: [usize; 16] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 0, 1, 2, 3, 4, 5, 0];
const WAIT_HOURS: [i64; 16] = [10, 17, 6, 14, 20, 8, 30, 12, 15, 9, 18, 11, 7, 16, 13, 10];
/// Minutes between first view and feedback, in tenths.
const POST_VIEW_TENTHS: [i64; 16] = [
    120, 250, 90, 180, 290, 140, 220, 110, 160, 200, 130, 270, 150, 190, 100, 248,
];
const LATE_CODING: [usize; 2] = [3, 9];
const NO_VIDEO: [usize; 4] = [2, 7, 11, 14];
const SOLVED: [usize; 4] = [1, 6, 10, 13];
const SOLVED_AFTER_FEEDBACK: [usize; 2] = [0, 5];

use UnhelpfulReason::{Incorrect as I, Misfocused as M, Unclear as C, Uninformative as U};

const STORY_REASON: [UnhelpfulReason; 16] = [I, U, I, M, I, C, I, U, M, I, U, I, M, C, I, U];
const STORY_HIGH_QUALITY: [usize; 7] = [1, 3, 5, 7, 8, 9, 10];
/// Reasons for the 30 unescalated unhelpful hints of escalating students.
const OTHER_REASONS: [(UnhelpfulReason, usize); 4] = [(I, 6), (U, 10), (M, 9), (C, 5)];
/// Types for those 30 hints as (planning, optimization); the rest are debugging.
const OTHER_TYPES: (usize, usize) = (4, 4);

const FEEDBACK: [&str; 4] = [
    "Your filter runs before the missing values are dropped, so the count includes NaN rows. Try dropping them first.",
    "The regular expression matches across word boundaries. Anchor the pattern and test it on the second example.",
    "groupby returns a Series here, not a DataFrame. Check the type before calling reset_index.",
    "You read the sheet with the default header row, but the data starts on row three. Look at skiprows.",
];

const NOTES: [&str; 3] = [
    "The hint says my merge is wrong but the columns match.",
    "I tried what the hint said and still get the same error.",
    "I don't understand which line the hint is talking about.",
];

fn epoch() -> Timestamp {
    "2025-01-06T08:00:00Z".parse().expect("valid timestamp")
}

fn at(offset_ms: i64) -> Timestamp {
    Timestamp::from_millis(epoch().millis() + offset_ms).expect("in range")
}

fn week_start(assignment: usize) -> i64 {
    assignment as i64 * 7 * DAY
}

fn student_id(i: usize) -> StudentId {
    format!("s{:03}", i + 1).into()
}

fn question_id(assignment: usize, q: usize) -> QuestionId {
    format!("a{}-q{}", assignment + 1, q + 1).into()
}

fn type_index(t: HintType) -> usize {
    match t {
        HintType::Planning => 0,
        HintType::Debugging => 1,
        HintType::Optimization => 2,
    }
}

const TYPES: [HintType; 3] = [
    HintType::Planning,
    HintType::Debugging,
    HintType::Optimization,
];

#[derive(Debug, Clone)]
struct Unit {
    student: usize,
    assignment: usize,
    question: usize,
    hint_type: HintType,
    at: i64,
    rating: Option<Rating>,
    comment: bool,
}

#[derive(Debug, Clone)]
enum Action {
    Consent(usize),
    Request(usize),
    Deliver(usize),
    Rate(usize),
    Escalate {
        unit: usize,
        story: usize,
    },
    Serve(usize),
    Feedback(usize),
    Activity {
        student: usize,
        assignment: usize,
        question: usize,
        kind: ActivityKind,
    },
    Annotate {
        unit: usize,
        case: usize,
    },
}

struct Case {
    reasons: BTreeSet<UnhelpfulReason>,
    bugs: BTreeSet<BugType>,
    quality: Option<FeedbackQuality>,
}

struct Plan {
    units: Vec<Unit>,
    cases: Vec<Case>,
    actions: Vec<(i64, Action)>,
    quota: BTreeMap<(usize, usize, usize, usize), usize>,
}

impl Plan {
    fn add_unit(&mut self, unit: Unit) -> usize {
        let key = (
            unit.student,
            unit.assignment,
            unit.question,
            type_index(unit.hint_type),
        );
        let used = self.quota.entry(key).or_default();
        *used += 1;
        let limit = [1, 3, 1][type_index(unit.hint_type)];
        assert!(*used <= limit, "fixture plan breaks quota for {key:?}");
        self.units.push(unit);
        self.units.len() - 1
    }

    fn has_room(&self, student: usize, assignment: usize, question: usize, t: HintType) -> bool {
        let used = self
            .quota
            .get(&(student, assignment, question, type_index(t)))
            .copied()
            .unwrap_or(0);
        used < [1, 3, 1][type_index(t)]
    }

    fn activity(
        &mut self,
        when: i64,
        student: usize,
        assignment: usize,
        question: usize,
        kind: ActivityKind,
    ) {
        self.actions.push((
            when,
            Action::Activity {
                student,
                assignment,
                question,
                kind,
            },
        ));
    }

    fn case(&mut self, reason: UnhelpfulReason, quality: Option<FeedbackQuality>) -> usize {
        let m = self.cases.len();
        let mut bugs = BTreeSet::from([BugType::ALL[m % 5]]);
        if m.is_multiple_of(4) {
            bugs.insert(BugType::ALL[(m + 2) % 5]);
        }
        self.cases.push(Case {
            reasons: BTreeSet::from([reason]),
            bugs,
            quality,
        });
        m
    }
}

fn story_quality(story: usize) -> FeedbackQuality {
    if STORY_HIGH_QUALITY.contains(&story) {
        return FeedbackQuality::high();
    }
    let reasons = match STORY_REASON[story] {
        I if story.is_multiple_of(2) => vec![I],
        I => vec![I, C],
        U => vec![U],
        M => vec![M],
        C => vec![C],
    };
    FeedbackQuality::low(reasons).expect("non-empty reasons")
}

fn plan() -> Plan {
    let mut plan = Plan {
        units: Vec::new(),
        cases: Vec::new(),
        actions: Vec::new(),
        quota: BTreeMap::new(),
    };
    let mut story_questions: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut windows = Vec::new();

    // Escalations, one after another within each week.
    let mut cursor: [i64; 4] = std::array::from_fn(|a| week_start(a) + DAY + HOUR);
    for story in 0..16 {
        let a = STORY_ASSIGNMENT[story];
        let student = ESCALATORS[STORY_ESCALATOR[story]];
        let question = story % QUESTIONS_PER_ASSIGNMENT[a];
        story_questions.insert((student, a, question));
        let escalated = cursor[a];
        let feedback = escalated + WAIT_HOURS[story] * HOUR;
        let viewed = feedback - POST_VIEW_TENTHS[story] * MINUTE / 10;
        cursor[a] = feedback + 3 * HOUR;
        windows.push((escalated, viewed, feedback));

        let unit = plan.add_unit(Unit {
            student,
            assignment: a,
            question,
            hint_type: HintType::Debugging,
            at: escalated - 40 * MINUTE,
            rating: Some(Rating::Unhelpful),
            comment: true,
        });
        plan.actions
            .push((escalated, Action::Escalate { unit, story }));
        plan.actions.push((viewed, Action::Serve(story)));
        plan.actions.push((feedback, Action::Feedback(story)));
        let case = plan.case(STORY_REASON[story], Some(story_quality(story)));
        plan.actions
            .push((week_start(4) + DAY, Action::Annotate { unit, case }));

        let act =
            |plan: &mut Plan, when: i64, kind| plan.activity(when, student, a, question, kind);
        act(&mut plan, escalated - 50 * MINUTE, ActivityKind::Coding);
        let first_code = if LATE_CODING.contains(&story) { 90 } else { 20 };
        act(
            &mut plan,
            escalated + first_code * MINUTE,
            ActivityKind::Coding,
        );
        act(&mut plan, escalated + 5 * HOUR, ActivityKind::Coding);
        if !NO_VIDEO.contains(&story) {
            act(&mut plan, escalated + 2 * HOUR, ActivityKind::VideoWatch);
        }
        if story % 2 == 0 {
            plan.add_unit(Unit {
                student,
                assignment: a,
                question,
                hint_type: HintType::Debugging,
                at: escalated + 3 * HOUR,
                rating: Some(Rating::Helpful),
                comment: false,
            });
        }
        if SOLVED.contains(&story) {
            act(
                &mut plan,
                escalated + 4 * HOUR,
                ActivityKind::QuestionSolved,
            );
        }
        if SOLVED_AFTER_FEEDBACK.contains(&story) {
            act(&mut plan, feedback + 2 * HOUR, ActivityKind::QuestionSolved);
        }
        act(&mut plan, feedback + 30 * MINUTE, ActivityKind::Coding);
    }

    // Unhelpful hints the escalating students did not escalate.
    let reasons: Vec<UnhelpfulReason> = OTHER_REASONS
        .iter()
        .flat_map(|&(r, n)| std::iter::repeat_n(r, n))
        .collect();
    let all_questions: Vec<(usize, usize)> = (0..4)
        .flat_map(|a| (0..QUESTIONS_PER_ASSIGNMENT[a]).map(move |q| (a, q)))
        .collect();
    for (k, reason) in reasons.into_iter().enumerate() {
        let student = ESCALATORS[k % ESCALATORS.len()];
        let hint_type = if k < OTHER_TYPES.0 {
            HintType::Planning
        } else if k < OTHER_TYPES.0 + OTHER_TYPES.1 {
            HintType::Optimization
        } else {
            HintType::Debugging
        };
        let (a, question) = (0..all_questions.len())
            .map(|i| all_questions[(k * 5 + i) % all_questions.len()])
            .find(|&(a, q)| {
                !story_questions.contains(&(student, a, q))
                    && plan.has_room(student, a, q, hint_type)
            })
            .expect("a free question");
        let unit = plan.add_unit(Unit {
            student,
            assignment: a,
            question,
            hint_type,
            at: week_start(a) + 4 * DAY + k as i64 * 2 * HOUR,
            rating: Some(Rating::Unhelpful),
            comment: k % 2 == 0,
        });
        if k == 0 {
            // A first label that is later corrected.
            let wrong = plan.case(UnhelpfulReason::Misfocused, None);
            plan.actions
                .push((week_start(4) + DAY, Action::Annotate { unit, case: wrong }));
        }
        let case = plan.case(reason, None);
        plan.actions
            .push((week_start(4) + DAY + HOUR, Action::Annotate { unit, case }));
    }

    // Everyone else fills the remaining totals.
    let escalators: BTreeSet<usize> = ESCALATORS.into_iter().collect();
    let background: Vec<usize> = (0..STUDENTS).filter(|s| !escalators.contains(s)).collect();
    let mut remaining = HINTS_PER_ASSIGNMENT;
    let mut unhelpful_left = UNHELPFUL;
    for unit in &plan.units {
        let slot = &mut remaining[unit.assignment][type_index(unit.hint_type)];
        *slot = slot
            .checked_sub(1)
            .expect("escalating students fit the totals");
        if unit.rating == Some(Rating::Unhelpful) {
            unhelpful_left[type_index(unit.hint_type)] -= 1;
        }
    }
    let mut background_units: Vec<Unit> = Vec::new();
    for a in 0..4 {
        let nq = QUESTIONS_PER_ASSIGNMENT[a];
        let mut week = Vec::new();
        let mut pointer = 0usize;
        for (t, &count) in remaining[a].iter().enumerate() {
            for _ in 0..count {
                let hint_type = TYPES[t];
                let (student, question) = loop {
                    let student = background[pointer % background.len()];
                    let question = (pointer / background.len() + pointer) % nq;
                    pointer += 1;
                    let taken = week.iter().filter(|u: &&Unit| {
                        u.student == student && u.question == question && u.hint_type == hint_type
                    });
                    if taken.count() < [1, 3, 1][t] {
                        break (student, question);
                    }
                };
                week.push(Unit {
                    student,
                    assignment: a,
                    question,
                    hint_type,
                    at: 0,
                    rating: None,
                    comment: false,
                });
            }
        }
        // Interleave types across the week.
        week.sort_by_key(|u| (u.student, u.question, type_index(u.hint_type)));
        let spacing = (6 * DAY + 12 * HOUR) / week.len() as i64;
        for (i, unit) in week.iter_mut().enumerate() {
            unit.at = week_start(a) + 30 * MINUTE + i as i64 * spacing;
            unit.comment = i % 3 == 0;
        }
        background_units.extend(week);
    }
    for (t, &target) in unhelpful_left.iter().enumerate() {
        let of_type: Vec<usize> = (0..background_units.len())
            .filter(|&i| type_index(background_units[i].hint_type) == t)
            .collect();
        let n = of_type.len();
        for (i, &u) in of_type.iter().enumerate() {
            let unhelpful = (i + 1) * target / n > i * target / n;
            background_units[u].rating = if unhelpful {
                Some(Rating::Unhelpful)
            } else if i % 9 == 8 {
                None
            } else {
                Some(Rating::Helpful)
            };
        }
    }
    for unit in background_units {
        plan.add_unit(unit);
    }

    // Request, delivery and rating actions; latencies pair up around 20 s.
    let mut order: Vec<usize> = (0..plan.units.len()).collect();
    order.sort_by_key(|&u| (plan.units[u].at, u));
    let mut first_seen = BTreeMap::new();
    for (i, &u) in order.iter().enumerate() {
        let unit = &plan.units[u];
        first_seen.entry(unit.student).or_insert(unit.at);
        let spread = ((i / 2) % 7 + 1) as i64 * 1000;
        let latency = if i + 1 == order.len() && order.len() % 2 == 1 {
            20_000
        } else if i % 2 == 0 {
            20_000 + spread
        } else {
            20_000 - spread
        };
        plan.actions.push((unit.at, Action::Request(u)));
        plan.actions.push((unit.at + latency, Action::Deliver(u)));
        if unit.rating.is_some() {
            plan.actions
                .push((unit.at + latency + 2 * MINUTE, Action::Rate(u)));
        }
    }
    for (student, first) in first_seen {
        plan.actions
            .push((first - MINUTE, Action::Consent(student)));
    }
    plan
}

fn latency_of(actions: &[(i64, Action)], unit: usize, created: i64) -> Duration {
    let delivered = actions
        .iter()
        .find_map(|(t, a)| matches!(a, Action::Deliver(u) if *u == unit).then_some(*t))
        .expect("every request is delivered");
    Duration::from_millis((delivered - created) as u64)
}

/// Builds the deployment log. Deterministic: same output every call.
pub fn deployment_log() -> Vec<EventRecord> {
    let mut plan = plan();
    // Stable sort keeps insertion order for simultaneous actions.
    let mut actions = std::mem::take(&mut plan.actions);
    actions.sort_by_key(|(t, _)| *t);

    let clock = Arc::new(ManualClock::new(at(0)));
    let (desk, log) = HelpDesk::in_memory(
        DeskConfig::default(),
        clock.clone(),
        Arc::new(SequentialIds::new()),
    );
    let instructor = InstructorId::from("instructor-1");
    let mut requests = vec![None; plan.units.len()];
    let mut hints: Vec<Option<HintId>> = vec![None; plan.units.len()];
    let mut escalations: Vec<Option<EscalationId>> = vec![None; 16];

    for (when, action) in &actions {
        clock.set(at(*when));
        match action {
            Action::Consent(s) => {
                desk.record_consent(&student_id(*s)).expect("consent");
            }
            Action::Request(u) => {
                let unit = &plan.units[*u];
                let draft = RequestDraft {
                    assignment_id: format!("a{}", unit.assignment + 1).into(),
                    question_id: question_id(unit.assignment, unit.question),
                    hint_type: unit.hint_type,
                    comment: unit
                        .comment
                        .then(|| "My output has more rows than expected.".to_owned()),
                    code: format!(
                        "import pandas as pd\ndf = pd.read_csv('data.csv')\n# attempt {u}\n"
                    ),
                };
                let request = desk
                    .create_help_request(&student_id(unit.student), draft)
                    .expect("request");
                desk.start_generation(&request.request_id).expect("start");
                requests[*u] = Some(request.request_id);
            }
            Action::Deliver(u) => {
                let latency = latency_of(&actions, *u, plan.units[*u].at);
                let id = requests[*u].as_ref().expect("requested");
                let hint = desk.deliver_hint(
                    id,
                    format!("Hint {u}: check the condition used to filter rows."),
                    latency,
                );
                hints[*u] = Some(hint.expect("deliver").hint_id);
            }
            Action::Rate(u) => {
                let unit = &plan.units[*u];
                let hint = hints[*u].as_ref().expect("delivered");
                desk.rate_hint(&student_id(unit.student), hint, unit.rating.expect("rated"))
                    .expect("rate");
            }
            Action::Escalate { unit, story } => {
                let hint = hints[*unit].as_ref().expect("delivered");
                let note = (story % 4 != 3).then(|| NOTES[story % NOTES.len()].to_owned());
                let escalation = desk
                    .escalate(&student_id(plan.units[*unit].student), hint, note)
                    .expect("escalate");
                escalations[*story] = Some(escalation.escalation_id);
            }
            Action::Serve(story) => {
                let served = desk
                    .next_unresolved(&instructor)
                    .expect("serve")
                    .expect("queue not empty");
                assert_eq!(
                    Some(&served.escalation.escalation_id),
                    escalations[*story].as_ref()
                );
            }
            Action::Feedback(story) => {
                let id = escalations[*story].as_ref().expect("escalated");
                desk.submit_feedback(&instructor, id, FEEDBACK[story % FEEDBACK.len()])
                    .expect("feedback");
            }
            Action::Activity {
                student,
                assignment,
                question,
                kind,
            } => {
                let activity = ActivityPayload {
                    student_id: student_id(*student),
                    question_id: question_id(*assignment, *question),
                    activity: *kind,
                    at: at(*when),
                };
                desk.record_activity(activity).expect("activity");
            }
            Action::Annotate { unit, case } => {
                let hint = hints[*unit].clone().expect("delivered");
                let target = match desk.read(|s| {
                    s.escalation_for_hint(&hint)
                        .map(|e| e.escalation_id.clone())
                }) {
                    Some(escalation) => AnnotationTarget::Escalation(escalation),
                    None => AnnotationTarget::Hint(hint),
                };
                let case = &plan.cases[*case];
                desk.annotate(
                    &target,
                    case.bugs.clone(),
                    case.reasons.clone(),
                    case.quality.clone(),
                    "analyst-1",
                )
                .expect("annotate");
            }
        }
    }
    log.records()
}

/// The log as JSONL text, one record per line.
pub fn deployment_jsonl() -> String {
    deployment_log()
        .iter()
        .map(|r| r.to_line() + "\n")
        .collect()
}
