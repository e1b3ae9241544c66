//! Request, delivery, rating and escalation tallies.

use std::collections::{BTreeMap, BTreeSet};

use hintdesk_core::{AssignmentId, HintType, Rating, RequestState, ServiceState, StudentId};
use serde::{Deserialize, Serialize};

use crate::ratio::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeCounts {
    pub requested: u64,
    pub delivered: u64,
    pub failed: u64,
    pub unhelpful: u64,
    pub escalated: u64,
}

impl TypeCounts {
    pub fn unhelpful_rate(&self) -> Ratio {
        Ratio::new(self.unhelpful, self.delivered)
    }

    /// Share of unhelpful hints that were escalated.
    pub fn escalation_rate(&self) -> Ratio {
        Ratio::new(self.escalated, self.unhelpful)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssignmentCounts {
    pub requested: u64,
    pub escalated: u64,
    pub escalating_students: u64,
    /// Of all requests.
    pub request_share: Ratio,
    /// Of all escalations.
    pub escalation_share: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UsageStats {
    pub totals: TypeCounts,
    pub by_type: BTreeMap<HintType, TypeCounts>,
    pub by_assignment: BTreeMap<AssignmentId, AssignmentCounts>,
    pub requesting_students: u64,
    pub escalating_students: u64,
    pub unhelpful_rate: Ratio,
    pub escalation_rate: Ratio,
}

pub fn compute_usage_stats(state: &ServiceState) -> UsageStats {
    let mut by_type: BTreeMap<HintType, TypeCounts> = HintType::ALL
        .iter()
        .map(|t| (*t, TypeCounts::default()))
        .collect();
    let mut by_assignment: BTreeMap<AssignmentId, AssignmentCounts> = BTreeMap::new();
    let mut escalators_by_assignment: BTreeMap<AssignmentId, BTreeSet<&StudentId>> =
        BTreeMap::new();
    let mut requesters = BTreeSet::new();
    let mut escalators = BTreeSet::new();

    for request in state.requests() {
        let counts = by_type
            .get_mut(&request.hint_type)
            .expect("all types present");
        counts.requested += 1;
        if request.state == RequestState::Failed {
            counts.failed += 1;
        }
        requesters.insert(&request.student_id);
        by_assignment
            .entry(request.assignment_id.clone())
            .or_default()
            .requested += 1;
        let Some(hint) = state.hint_for_request(&request.request_id) else {
            continue;
        };
        counts.delivered += 1;
        if hint.rating == Some(Rating::Unhelpful) {
            counts.unhelpful += 1;
        }
        if state.escalation_for_hint(&hint.hint_id).is_some() {
            counts.escalated += 1;
            escalators.insert(&request.student_id);
            by_assignment
                .get_mut(&request.assignment_id)
                .expect("inserted above")
                .escalated += 1;
            escalators_by_assignment
                .entry(request.assignment_id.clone())
                .or_default()
                .insert(&request.student_id);
        }
    }

    let mut totals = TypeCounts::default();
    for c in by_type.values() {
        totals.requested += c.requested;
        totals.delivered += c.delivered;
        totals.failed += c.failed;
        totals.unhelpful += c.unhelpful;
        totals.escalated += c.escalated;
    }
    for (assignment, counts) in &mut by_assignment {
        counts.escalating_students = escalators_by_assignment
            .get(assignment)
            .map_or(0, |s| s.len() as u64);
        counts.request_share = Ratio::new(counts.requested, totals.requested);
        counts.escalation_share = Ratio::new(counts.escalated, totals.escalated);
    }
    UsageStats {
        totals,
        by_type,
        by_assignment,
        requesting_students: requesters.len() as u64,
        escalating_students: escalators.len() as u64,
        unhelpful_rate: totals.unhelpful_rate(),
        escalation_rate: totals.escalation_rate(),
    }
}
