//! Deployment metrics recomputed from a hintdesk event log.

pub mod activity;
pub mod annotations;
pub mod fixture;
pub mod ratio;
pub mod report;
pub mod usage;
pub mod wait;

pub use activity::{compute_activity_during_wait, ActivityStats, EscalationTimeline};
pub use annotations::{compute_annotation_stats, AnnotationStats, EscalationSplit, QualitySplit};
pub use ratio::Ratio;
pub use report::{
    analyze, analyze_file, emit_report, parse_json_report, render, AnalyticsReport, ReportFormat,
};
pub use usage::{compute_usage_stats, AssignmentCounts, TypeCounts, UsageStats};
pub use wait::{compute_ai_latency, compute_wait_stats, LatencyStats, WaitStats};
