//! How long students waited, for instructors and for the AI.

use hintdesk_core::ServiceState;
use serde::{Deserialize, Serialize};

/// Escalation waits in milliseconds. Means are over resolved escalations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WaitStats {
    pub escalations: u64,
    pub resolved: u64,
    pub open: u64,
    pub mean_wait_ms: Option<f64>,
    pub median_wait_ms: Option<f64>,
    /// From first view to feedback.
    pub mean_post_view_ms: Option<f64>,
}

impl WaitStats {
    pub fn mean_wait_hours(&self) -> Option<f64> {
        self.mean_wait_ms.map(|ms| ms / 3_600_000.0)
    }

    pub fn median_wait_hours(&self) -> Option<f64> {
        self.median_wait_ms.map(|ms| ms / 3_600_000.0)
    }

    pub fn mean_post_view_minutes(&self) -> Option<f64> {
        self.mean_post_view_ms.map(|ms| ms / 60_000.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub hints: u64,
    pub mean_ms: f64,
}

impl LatencyStats {
    pub fn mean_seconds(&self) -> f64 {
        self.mean_ms / 1000.0
    }
}

pub(crate) fn mean(values: &[i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().map(|&v| v as i128).sum::<i128>() as f64 / values.len() as f64)
}

pub(crate) fn median(values: &mut [i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] as f64 + values[mid] as f64) / 2.0
    })
}

/// `None` when nothing was ever escalated.
pub fn compute_wait_stats(state: &ServiceState) -> Option<WaitStats> {
    let mut stats = WaitStats::default();
    let mut waits = Vec::new();
    let mut post_view = Vec::new();
    for escalation in state.escalations() {
        stats.escalations += 1;
        let Some(feedback) = state.feedback_for_escalation(&escalation.escalation_id) else {
            stats.open += 1;
            continue;
        };
        stats.resolved += 1;
        waits.push(feedback.created_at.millis_since(escalation.created_at));
        if let Some(viewed) = escalation.viewed_at {
            post_view.push(feedback.created_at.millis_since(viewed));
        }
    }
    if stats.escalations == 0 {
        return None;
    }
    stats.mean_wait_ms = mean(&waits);
    stats.median_wait_ms = median(&mut waits);
    stats.mean_post_view_ms = mean(&post_view);
    Some(stats)
}

/// `None` when no hint was delivered.
pub fn compute_ai_latency(state: &ServiceState) -> Option<LatencyStats> {
    let latencies: Vec<i64> = state
        .hints()
        .map(|h| h.generation_latency.as_millis() as i64)
        .collect();
    Some(LatencyStats {
        hints: latencies.len() as u64,
        mean_ms: mean(&latencies)?,
    })
}
