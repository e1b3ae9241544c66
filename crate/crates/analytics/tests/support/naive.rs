//! A naive recomputation of every analytics aggregate by scanning raw
//! events, independent of the replayed service state.

use std::collections::{BTreeMap, BTreeSet};

use hintdesk_analytics::AnalyticsReport;
use hintdesk_core::{
    ActivityKind, AnnotatedCase, BugType, EventBody, EventRecord, HelpRequest, Hint, HintType,
    Rating, UnhelpfulReason,
};

/// Counts and sums only; no derived types from the crate under test.
#[derive(Debug, PartialEq, Default)]
pub struct Expected {
    pub by_type: BTreeMap<String, [u64; 5]>,
    pub by_assignment: BTreeMap<String, (u64, u64, u64)>,
    pub requesting: u64,
    pub escalating: u64,
    pub escalations: u64,
    pub resolved: u64,
    pub waits: Vec<i64>,
    pub post_view: Vec<i64>,
    pub latencies: Vec<i64>,
    pub activity: [u64; 6],
    pub cases: u64,
    pub escalated_cases: u64,
    pub by_reason: BTreeMap<String, (u64, u64)>,
    pub by_bug: BTreeMap<String, (u64, u64)>,
    pub quality: (u64, u64),
    pub after_incorrect: (u64, u64),
}

fn type_name(t: HintType) -> String {
    format!("{t:?}")
}

pub fn naive(records: &[EventRecord]) -> Expected {
    let mut requests: Vec<HelpRequest> = Vec::new();
    let mut failed = BTreeSet::new();
    let mut hints: Vec<Hint> = Vec::new();
    let mut ratings = BTreeMap::new();
    let mut escalations = Vec::new();
    let mut viewed = BTreeMap::new();
    let mut feedback = BTreeMap::new();
    let mut activity = Vec::new();
    let mut cases: Vec<AnnotatedCase> = Vec::new();
    for r in records {
        match &r.body {
            EventBody::RequestCreated { request } => requests.push(request.clone()),
            EventBody::GenerationFailed { request_id, .. } => {
                failed.insert(request_id.clone());
            }
            EventBody::HintDelivered { hint } => hints.push(hint.clone()),
            EventBody::HintRated { hint_id, rating } => {
                ratings.insert(hint_id.clone(), *rating);
            }
            EventBody::Escalated { escalation } => escalations.push(escalation.clone()),
            EventBody::EscalationViewed { escalation_id, .. } => {
                viewed.entry(escalation_id.clone()).or_insert(r.ts);
            }
            EventBody::FeedbackSubmitted { feedback: f } => {
                feedback
                    .entry(f.escalation_id.clone())
                    .or_insert(f.created_at);
            }
            EventBody::ActivityObserved(a) => activity.push(a.clone()),
            EventBody::CaseAnnotated { case } => {
                cases.retain(|c| c.hint_id != case.hint_id);
                cases.push(case.clone());
            }
            _ => {}
        }
    }
    let request_of_hint = |hint_id| {
        let hint = hints.iter().find(|h| &h.hint_id == hint_id).unwrap();
        requests
            .iter()
            .find(|r| r.request_id == hint.request_id)
            .unwrap()
    };
    let escalated_hints: BTreeSet<_> = escalations.iter().map(|e| e.hint_id.clone()).collect();

    let mut e = Expected::default();
    for t in HintType::ALL {
        let of_type: Vec<_> = requests.iter().filter(|r| r.hint_type == t).collect();
        let delivered: Vec<_> = hints
            .iter()
            .filter(|h| of_type.iter().any(|r| r.request_id == h.request_id))
            .collect();
        e.by_type.insert(
            type_name(t),
            [
                of_type.len() as u64,
                delivered.len() as u64,
                of_type
                    .iter()
                    .filter(|r| failed.contains(&r.request_id))
                    .count() as u64,
                delivered
                    .iter()
                    .filter(|h| ratings.get(&h.hint_id) == Some(&Rating::Unhelpful))
                    .count() as u64,
                delivered
                    .iter()
                    .filter(|h| escalated_hints.contains(&h.hint_id))
                    .count() as u64,
            ],
        );
    }
    let assignments: BTreeSet<_> = requests
        .iter()
        .map(|r| r.assignment_id.to_string())
        .collect();
    for a in assignments {
        let escalated: Vec<_> = escalations
            .iter()
            .map(|x| request_of_hint(&x.hint_id))
            .filter(|r| r.assignment_id.to_string() == a)
            .collect();
        let students: BTreeSet<_> = escalated.iter().map(|r| &r.student_id).collect();
        let count = requests
            .iter()
            .filter(|r| r.assignment_id.to_string() == a)
            .count() as u64;
        e.by_assignment
            .insert(a, (count, escalated.len() as u64, students.len() as u64));
    }
    e.requesting = requests
        .iter()
        .map(|r| &r.student_id)
        .collect::<BTreeSet<_>>()
        .len() as u64;
    e.escalating = escalations
        .iter()
        .map(|x| &request_of_hint(&x.hint_id).student_id)
        .collect::<BTreeSet<_>>()
        .len() as u64;

    e.escalations = escalations.len() as u64;
    for x in &escalations {
        if let Some(f) = feedback.get(&x.escalation_id) {
            e.resolved += 1;
            e.waits.push(f.millis() - x.created_at.millis());
            if let Some(v) = viewed.get(&x.escalation_id) {
                e.post_view.push(f.millis() - v.millis());
            }
        }
    }
    e.latencies = hints
        .iter()
        .map(|h| h.generation_latency.as_millis() as i64)
        .collect();

    e.activity[0] = escalations.len() as u64;
    for x in &escalations {
        let request = request_of_hint(&x.hint_id);
        let start = x.created_at.millis();
        let end = feedback
            .get(&x.escalation_id)
            .map(|f| f.millis())
            .unwrap_or(i64::MAX);
        let inside = |t: i64| start <= t && t <= end;
        let mut seen: Vec<(ActivityKind, i64)> = activity
            .iter()
            .filter(|a| a.student_id == request.student_id && a.question_id == request.question_id)
            .map(|a| (a.activity, a.at.millis()))
            .collect();
        for other in &requests {
            if other.request_id != request.request_id
                && other.student_id == request.student_id
                && other.question_id == request.question_id
            {
                seen.push((ActivityKind::HintRequest, other.created_at.millis()));
            }
        }
        let any = |kind| seen.iter().any(|&(k, t)| k == kind && inside(t));
        let early_coding = seen
            .iter()
            .any(|&(k, t)| k == ActivityKind::Coding && inside(t) && t - start <= 3_600_000);
        for (slot, hit) in [
            any(ActivityKind::Coding),
            early_coding,
            any(ActivityKind::VideoWatch),
            any(ActivityKind::HintRequest),
            any(ActivityKind::QuestionSolved),
        ]
        .into_iter()
        .enumerate()
        {
            e.activity[slot + 1] += hit as u64;
        }
    }

    for r in UnhelpfulReason::ALL {
        e.by_reason.insert(format!("{r:?}"), (0, 0));
    }
    for b in BugType::ALL {
        e.by_bug.insert(format!("{b:?}"), (0, 0));
    }
    for c in &cases {
        let escalated = escalated_hints.contains(&c.hint_id);
        e.cases += 1;
        e.escalated_cases += escalated as u64;
        let bump = |slot: &mut (u64, u64)| if escalated { slot.0 += 1 } else { slot.1 += 1 };
        for r in &c.unhelpful_reasons {
            bump(e.by_reason.get_mut(&format!("{r:?}")).unwrap());
        }
        for b in &c.bug_types {
            bump(e.by_bug.get_mut(&format!("{b:?}")).unwrap());
        }
        if let (true, Some(q)) = (escalated, &c.feedback_quality) {
            let high = q.is_high();
            if high {
                e.quality.0 += 1
            } else {
                e.quality.1 += 1
            }
            if c.unhelpful_reasons.contains(&UnhelpfulReason::Incorrect) {
                if high {
                    e.after_incorrect.0 += 1
                } else {
                    e.after_incorrect.1 += 1
                }
            }
        }
    }
    e
}

fn mean(v: &[i64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<i64>() as f64 / v.len() as f64)
}

fn median(v: &[i64]) -> Option<f64> {
    let mut v = v.to_vec();
    v.sort();
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2] as f64),
        _ => Some((v[n / 2 - 1] + v[n / 2]) as f64 / 2.0),
    }
}

pub fn check(report: &AnalyticsReport, e: &Expected) {
    let u = &report.usage;
    for (t, c) in &u.by_type {
        assert_eq!(
            e.by_type[&type_name(*t)],
            [c.requested, c.delivered, c.failed, c.unhelpful, c.escalated]
        );
    }
    let sum = |i: usize| e.by_type.values().map(|c| c[i]).sum::<u64>();
    assert_eq!(
        [
            u.totals.requested,
            u.totals.delivered,
            u.totals.failed,
            u.totals.unhelpful,
            u.totals.escalated
        ],
        [sum(0), sum(1), sum(2), sum(3), sum(4)]
    );
    assert_eq!(
        (u.unhelpful_rate.numerator, u.unhelpful_rate.denominator),
        (sum(3), sum(1))
    );
    assert_eq!(
        (u.escalation_rate.numerator, u.escalation_rate.denominator),
        (sum(4), sum(3))
    );
    let got: BTreeMap<_, _> = u
        .by_assignment
        .iter()
        .map(|(a, c)| {
            (
                a.to_string(),
                (c.requested, c.escalated, c.escalating_students),
            )
        })
        .collect();
    assert_eq!(got, e.by_assignment);
    for c in u.by_assignment.values() {
        assert_eq!(c.request_share.denominator, sum(0));
        assert_eq!(c.escalation_share.denominator, sum(4));
    }
    assert_eq!(
        (u.requesting_students, u.escalating_students),
        (e.requesting, e.escalating)
    );

    match &report.wait {
        None => assert_eq!(e.escalations, 0),
        Some(w) => {
            assert_eq!(
                (w.escalations, w.resolved, w.open),
                (e.escalations, e.resolved, e.escalations - e.resolved)
            );
            assert_eq!(w.mean_wait_ms, mean(&e.waits));
            assert_eq!(w.median_wait_ms, median(&e.waits));
            assert_eq!(w.mean_post_view_ms, mean(&e.post_view));
        }
    }
    match &report.ai_latency {
        None => assert!(e.latencies.is_empty()),
        Some(l) => {
            assert_eq!(l.hints, e.latencies.len() as u64);
            assert_eq!(Some(l.mean_ms), mean(&e.latencies));
        }
    }

    let a = &report.activity;
    assert_eq!(
        [
            a.escalations,
            a.coding.numerator,
            a.coding_first_hour.numerator,
            a.video.numerator,
            a.further_hints.numerator,
            a.solved_before_feedback.numerator
        ],
        e.activity
    );
    assert!([
        a.coding,
        a.coding_first_hour,
        a.video,
        a.further_hints,
        a.solved_before_feedback
    ]
    .iter()
    .all(|r| r.denominator == e.activity[0]));

    let n = &report.annotations;
    assert_eq!((n.cases, n.escalated_cases), (e.cases, e.escalated_cases));
    let reasons: BTreeMap<_, _> = n
        .by_reason
        .iter()
        .map(|(r, s)| (format!("{r:?}"), (s.escalated, s.not_escalated)))
        .collect();
    assert_eq!(reasons, e.by_reason);
    let bugs: BTreeMap<_, _> = n
        .by_bug_type
        .iter()
        .map(|(b, s)| (format!("{b:?}"), (s.escalated, s.not_escalated)))
        .collect();
    assert_eq!(bugs, e.by_bug);
    assert_eq!((n.feedback_quality.high, n.feedback_quality.low), e.quality);
    assert_eq!(
        (
            n.low_after_incorrect.numerator,
            n.low_after_incorrect.denominator
        ),
        (
            e.after_incorrect.1,
            e.after_incorrect.0 + e.after_incorrect.1
        )
    );
}
