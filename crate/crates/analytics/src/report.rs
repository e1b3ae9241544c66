//! The combined report and its text and JSON renderings.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use hintdesk_core::{log, EventRecord, HintType, ServiceState};
use serde::{Deserialize, Serialize};

use crate::activity::{compute_activity_during_wait, ActivityStats};
use crate::annotations::{compute_annotation_stats, AnnotationStats};
use crate::ratio::Ratio;
use crate::usage::{compute_usage_stats, UsageStats};
use crate::wait::{compute_ai_latency, compute_wait_stats, LatencyStats, WaitStats};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub events: u64,
    pub usage: UsageStats,
    pub wait: Option<WaitStats>,
    pub ai_latency: Option<LatencyStats>,
    pub activity: ActivityStats,
    pub annotations: AnnotationStats,
}

impl AnalyticsReport {
    pub fn from_state(state: &ServiceState) -> Self {
        Self {
            events: state.last_seq(),
            usage: compute_usage_stats(state),
            wait: compute_wait_stats(state),
            ai_latency: compute_ai_latency(state),
            activity: compute_activity_during_wait(state),
            annotations: compute_annotation_stats(state),
        }
    }
}

/// Checks and replays a log, then computes every aggregate.
pub fn analyze(records: &[EventRecord]) -> hintdesk_core::Result<AnalyticsReport> {
    log::check_integrity(records)?;
    let state = ServiceState::replay(records)?;
    Ok(AnalyticsReport::from_state(&state))
}

/// Reads a log file and analyzes it.
pub fn analyze_file(path: &Path) -> hintdesk_core::Result<AnalyticsReport> {
    analyze(&log::read_log(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "table" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            other => Err(format!(
                "unknown report format `{other}` (expected text or json)"
            )),
        }
    }
}

pub fn render(report: &AnalyticsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => {
            let mut json = serde_json::to_string_pretty(report).expect("report serializes");
            json.push('\n');
            json
        }
    }
}

pub fn emit_report(report: &AnalyticsReport, format: ReportFormat, path: &Path) -> io::Result<()> {
    fs::write(path, render(report, format))
}

pub fn parse_json_report(text: &str) -> serde_json::Result<AnalyticsReport> {
    serde_json::from_str(text)
}

fn pct(r: Ratio) -> String {
    format!("{}%", r.percent())
}

fn or_dash(value: Option<f64>, unit: &str) -> String {
    value.map_or_else(|| "-".to_owned(), |v| format!("{v:.1} {unit}"))
}

fn render_text(r: &AnalyticsReport) -> String {
    let mut out = String::new();
    let u = &r.usage;
    // Writing to a String cannot fail.
    let _ = writeln!(out, "Hint requests by type");
    let _ = writeln!(
        out,
        "{:<14}{:>10}{:>10}{:>8}{:>10}{:>9}{:>10}{:>8}",
        "type", "requested", "delivered", "failed", "unhelpful", "rate", "escalated", "rate"
    );
    let row = |out: &mut String, name: &str, c: &crate::usage::TypeCounts| {
        let _ = writeln!(
            out,
            "{:<14}{:>10}{:>10}{:>8}{:>10}{:>9}{:>10}{:>8}",
            name,
            c.requested,
            c.delivered,
            c.failed,
            c.unhelpful,
            pct(c.unhelpful_rate()),
            c.escalated,
            pct(c.escalation_rate())
        );
    };
    for t in HintType::ALL {
        row(&mut out, t.as_str(), &u.by_type[&t]);
    }
    row(&mut out, "total", &u.totals);
    let _ = writeln!(out, "students requesting hints: {}", u.requesting_students);
    let _ = writeln!(out, "students escalating: {}", u.escalating_students);

    let _ = writeln!(out, "\nRequests by assignment");
    let _ = writeln!(
        out,
        "{:<14}{:>10}{:>8}{:>13}{:>8}{:>11}",
        "assignment", "requests", "share", "escalations", "share", "students"
    );
    for (assignment, c) in &u.by_assignment {
        let _ = writeln!(
            out,
            "{:<14}{:>10}{:>8}{:>13}{:>8}{:>11}",
            assignment.as_str(),
            c.requested,
            pct(c.request_share),
            c.escalated,
            pct(c.escalation_share),
            c.escalating_students
        );
    }

    let _ = writeln!(out, "\nWaiting times");
    match &r.wait {
        None => {
            let _ = writeln!(out, "no escalations");
        }
        Some(w) => {
            let _ = writeln!(
                out,
                "escalations: {} ({} resolved, {} open)",
                w.escalations, w.resolved, w.open
            );
            let _ = writeln!(
                out,
                "mean wait for feedback: {}",
                or_dash(w.mean_wait_hours(), "h")
            );
            let _ = writeln!(
                out,
                "median wait for feedback: {}",
                or_dash(w.median_wait_hours(), "h")
            );
            let _ = writeln!(
                out,
                "mean time from view to feedback: {}",
                or_dash(w.mean_post_view_minutes(), "min")
            );
        }
    }
    let _ = writeln!(
        out,
        "mean AI hint latency: {}",
        or_dash(r.ai_latency.as_ref().map(LatencyStats::mean_seconds), "s")
    );

    let a = &r.activity;
    let _ = writeln!(
        out,
        "\nActivity while waiting ({} escalations)",
        a.escalations
    );
    for (label, ratio) in [
        ("coding", a.coding),
        ("coding within first hour", a.coding_first_hour),
        ("watching videos", a.video),
        ("requesting further AI hints", a.further_hints),
        ("solved before feedback", a.solved_before_feedback),
    ] {
        let _ = writeln!(
            out,
            "{label:<30}{:>8}{:>6}",
            format!("{}/{}", ratio.numerator, ratio.denominator),
            pct(ratio)
        );
    }

    let n = &r.annotations;
    let _ = writeln!(
        out,
        "\nAnnotated cases ({}, {} escalated)",
        n.cases, n.escalated_cases
    );
    let _ = writeln!(
        out,
        "{:<28}{:>10}{:>15}{:>8}",
        "reason / bug type", "escalated", "not escalated", "rate"
    );
    let splits = n
        .by_reason
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .chain(n.by_bug_type.iter().map(|(k, v)| (k.as_str(), v)));
    for (label, s) in splits {
        let _ = writeln!(
            out,
            "{label:<28}{:>10}{:>15}{:>8}",
            s.escalated,
            s.not_escalated,
            pct(s.escalation_rate)
        );
    }
    let _ = writeln!(out, "\nInstructor feedback quality");
    let _ = writeln!(
        out,
        "{:<30}{:>8}{:>6}",
        "high quality",
        format!(
            "{}/{}",
            n.feedback_high_rate.numerator, n.feedback_high_rate.denominator
        ),
        pct(n.feedback_high_rate)
    );
    let _ = writeln!(
        out,
        "{:<30}{:>8}{:>6}",
        "low quality after incorrect AI",
        format!(
            "{}/{}",
            n.low_after_incorrect.numerator, n.low_after_incorrect.denominator
        ),
        pct(n.low_after_incorrect)
    );
    out
}
