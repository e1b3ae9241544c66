use std::fs;
use std::time::Duration;

use hintdesk_core::HintType;
use hintdesk_pipeline::ProviderKind;
use hintdesk_server::auth::Role;
use hintdesk_server::config::{Config, NotifierKind};

const EXAMPLE: &str = r#"
listen = "0.0.0.0:9000"
log_path = "data/events.jsonl"
lease_minutes = 20
templates_dir = "prompts"

[quota]
debugging = 2

[provider]
kind = "remote"
endpoint = "https://llm.example/v1/chat/completions"
timeout_secs = 90

[sandbox]
command = ["python3", "-I"]
limits = { wall_time_ms = 3000 }

[tasks]
"a1-q1" = "Load the CSV and count rows with a price above 10."

[notify]
adapter = "mail"
retries = 4
mail = { smtp_host = "relay", instructors = ["ta@course.test"] }

[[tokens]]
token = "aaaaaaaaaaaaaaaaaaaa"
role = "student"
id = "s1"

[[tokens]]
token = "bbbbbbbbbbbbbbbbbbbb"
role = "ingest"
"#;

#[test]
fn example_config_loads_with_paths_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hintdesk.toml");
    fs::write(&path, EXAMPLE).unwrap();
    let config = Config::load(&path).unwrap();
    assert_eq!(config.listen, "0.0.0.0:9000");
    assert_eq!(config.log_path, dir.path().join("data/events.jsonl"));
    assert_eq!(config.templates_dir, Some(dir.path().join("prompts")));
    assert_eq!(config.quota.limit(HintType::Debugging), 2);
    assert_eq!(config.quota.limit(HintType::Planning), 1);
    assert_eq!(
        config.desk_config().lease_duration,
        chrono::TimeDelta::minutes(20)
    );
    assert_eq!(config.provider.kind, ProviderKind::Remote);
    assert_eq!(config.provider.timeout, Duration::from_secs(90));
    assert_eq!(config.provider.max_retries, 1);
    assert_eq!(config.sandbox.limits.wall_time, Duration::from_secs(3));
    assert_eq!(config.sandbox.limits.memory_bytes, 256 * 1024 * 1024);
    assert_eq!(
        config.tasks.describe(&"a1-q1".into()),
        "Load the CSV and count rows with a price above 10."
    );
    assert_eq!(config.notify.adapter, NotifierKind::Mail);
    assert_eq!(config.notify.retries, 4);
    assert_eq!(config.notify.mail.smtp_port, 25);
    assert_eq!(config.tokens[1].role, Role::Ingest);
}

#[test]
fn defaults_match_the_classroom_setup() {
    let config = Config::default();
    assert_eq!(config.lease_minutes, 30);
    assert_eq!(config.notify.retries, 2);
    assert!(!config.attribute_feedback);
    assert_eq!(config.provider.timeout, Duration::from_secs(120));
}

fn load(text: &str) -> Result<Config, String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, text).unwrap();
    Config::load(&path).map_err(|e| e.to_string())
}

#[test]
fn bad_configs_are_rejected() {
    assert!(load("lisen = \"x\"").unwrap_err().contains("unknown field"));
    assert!(load("lease_minutes = 0")
        .unwrap_err()
        .contains("lease_minutes"));
    let short = "[[tokens]]\ntoken = \"abc\"\nrole = \"ingest\"\n";
    assert!(load(short).unwrap_err().contains("16 characters"));
    let anonymous = "[[tokens]]\ntoken = \"aaaaaaaaaaaaaaaaaaaa\"\nrole = \"instructor\"\n";
    assert!(load(anonymous).unwrap_err().contains("needs an id"));
    let twice = format!(
        "{0}{0}",
        "[[tokens]]\ntoken = \"aaaaaaaaaaaaaaaaaaaa\"\nrole = \"ingest\"\n"
    );
    assert!(load(&twice).unwrap_err().contains("duplicate"));
}
