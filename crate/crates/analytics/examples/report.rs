//! Prints the report for a log file.

use std::path::PathBuf;

use hintdesk_analytics::{analyze_file, render, ReportFormat};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .expect("usage: report <log.jsonl>")
        .into();
    let report = analyze_file(&path).expect("readable log");
    print!("{}", render(&report, ReportFormat::Text));
}
