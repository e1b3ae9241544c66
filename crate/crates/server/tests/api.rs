use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use hintdesk_core::{
    DeskConfig, HelpDesk, ManualClock, MemoryLog, SequentialIds, TaskCatalog, Timestamp,
};
use hintdesk_pipeline::{CannedExecutor, ExecutionResult, ExitStatus, HintPipeline, MockProvider};
use hintdesk_server::auth::{Role, TokenEntry, Tokens};
use hintdesk_server::config::NotifyConfig;
use hintdesk_server::notify::{self, DeliveryState, JobBook, JobKind, LogNotifier};
use hintdesk_server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

const ALICE: &str = "student-token-alice";
const BOB: &str = "student-token-bob-0";
const PROF: &str = "instructor-token-1";
const TA: &str = "instructor-token-2";
const INGEST: &str = "ingest-token-000000";

struct Harness {
    app: Router,
    log: MemoryLog,
    jobs: JobBook,
    notifier: Arc<LogNotifier>,
    clock: Arc<ManualClock>,
}

fn token(token: &str, role: Role, id: Option<&str>) -> TokenEntry {
    TokenEntry {
        token: token.into(),
        role,
        id: id.map(Into::into),
    }
}

fn harness() -> Harness {
    let clock = Arc::new(ManualClock::new(
        "2025-01-06T08:00:00Z".parse::<Timestamp>().unwrap(),
    ));
    let (desk, log) = HelpDesk::in_memory(
        DeskConfig::default(),
        clock.clone(),
        Arc::new(SequentialIds::new()),
    );
    let mut tasks = TaskCatalog::new();
    tasks.insert("q1", "Count the rows with a price above 10.");
    let desk = Arc::new(desk.with_tasks(tasks));
    let notifier = Arc::new(LogNotifier::default());
    let config = NotifyConfig {
        retry_delay_ms: 1,
        ..NotifyConfig::default()
    };
    let (jobs, _) = notify::start(&desk, notifier.clone(), &config);
    let run = ExecutionResult {
        stdout: String::new(),
        stderr: "KeyError: 'price'".into(),
        exit_status: ExitStatus::Error,
        wall_time: Duration::from_millis(40),
    };
    let pipeline = HintPipeline::new(
        Arc::new(MockProvider::new(7)),
        Arc::new(CannedExecutor(run)),
    );
    let tokens = Tokens::new(&[
        token(ALICE, Role::Student, Some("alice-1234")),
        token(BOB, Role::Student, Some("bob-5678")),
        token(PROF, Role::Instructor, Some("prof")),
        token(TA, Role::Instructor, Some("ta")),
        token(INGEST, Role::Ingest, None),
    ])
    .unwrap();
    let state = AppState {
        desk,
        pipeline: Arc::new(pipeline),
        tokens: Arc::new(tokens),
        jobs: jobs.clone(),
    };
    Harness {
        app: router(state),
        log,
        jobs,
        notifier,
        clock,
    }
}

impl Harness {
    async fn call(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let mut request = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            request = request.header("authorization", format!("Bearer {t}"));
        }
        let request = match body {
            Some(b) => request
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => request.body(Body::empty()),
        }
        .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = to_bytes(response.into_body(), 1 << 20).await.unwrap();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, Some(token), None).await
    }

    async fn post(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(token), Some(body)).await
    }

    async fn request_hint(&self, token: &str, hint_type: &str) -> (StatusCode, Value) {
        let body = json!({
            "assignment_id": "a1",
            "question_id": "q1",
            "hint_type": hint_type,
            "comment": "why is my count wrong?",
            "code": "df[df.price > 10].count()",
        });
        self.post("/api/hint-requests", token, body).await
    }

    async fn wait_for(&self, token: &str, request_id: &str) -> Value {
        for _ in 0..200 {
            let (status, body) = self
                .get(&format!("/api/hint-requests/{request_id}"), token)
                .await;
            assert_eq!(status, StatusCode::OK);
            if body["status"] != "generating" {
                return body;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("request {request_id} never finished");
    }

    /// Consents, gets a debugging hint and rates it unhelpful.
    async fn unhelpful_hint(&self, token: &str) -> String {
        self.post("/api/consent", token, json!({})).await;
        let (_, created) = self.request_hint(token, "debugging").await;
        let done = self
            .wait_for(token, created["request_id"].as_str().unwrap())
            .await;
        let hint_id = done["entry"]["hint"]["hint_id"]
            .as_str()
            .unwrap()
            .to_owned();
        let (status, _) = self
            .post(
                &format!("/api/hints/{hint_id}/rating"),
                token,
                json!({"rating": "unhelpful"}),
            )
            .await;
        assert_eq!(status, StatusCode::OK);
        hint_id
    }

    async fn settle_notifications(&self) {
        for _ in 0..200 {
            if self.jobs.pending() == 0 {
                return;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("notifications never settled");
    }
}

#[tokio::test]
async fn hint_request_without_consent_is_refused() {
    let h = harness();
    let (status, body) = h.request_hint(ALICE, "planning").await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "consent_missing");
    assert!(h.log.records().is_empty());
}

#[tokio::test]
async fn request_reports_generating_then_delivers() {
    let h = harness();
    let (status, _) = h.post("/api/consent", ALICE, json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, created) = h.request_hint(ALICE, "debugging").await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(created["status"], "generating");
    assert!(created["message"]
        .as_str()
        .unwrap()
        .contains("up to two minutes"));
    let done = h
        .wait_for(ALICE, created["request_id"].as_str().unwrap())
        .await;
    assert_eq!(done["status"], "delivered");
    assert!(!done["entry"]["hint"]["text"].as_str().unwrap().is_empty());
    assert!(done.get("message").is_none());
}

#[tokio::test]
async fn quota_is_enforced_with_its_own_code() {
    let h = harness();
    h.post("/api/consent", ALICE, json!({})).await;
    let (_, first) = h.request_hint(ALICE, "planning").await;
    h.wait_for(ALICE, first["request_id"].as_str().unwrap())
        .await;
    let (status, body) = h.request_hint(ALICE, "planning").await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(body["code"], "quota_exceeded");
    let (_, view) = h.get("/api/questions/q1/hints", ALICE).await;
    assert_eq!(view["remaining"]["planning"], 0);
    assert_eq!(view["remaining"]["debugging"], 3);
}

#[tokio::test]
async fn students_cannot_see_each_others_requests() {
    let h = harness();
    h.post("/api/consent", ALICE, json!({})).await;
    let (_, created) = h.request_hint(ALICE, "planning").await;
    let id = created["request_id"].as_str().unwrap();
    let (status, body) = h.get(&format!("/api/hint-requests/{id}"), BOB).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_request");
}

#[tokio::test]
async fn tokens_and_roles_are_checked() {
    let h = harness();
    let (status, body) = h
        .call(Method::POST, "/api/consent", None, Some(json!({})))
        .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::UNAUTHORIZED, Some("unauthorized"))
    );
    let (status, _) = h
        .post("/api/consent", "not-a-real-token-at-all", json!({}))
        .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, body) = h.get("/api/instructor/next", ALICE).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::FORBIDDEN, Some("forbidden"))
    );
    let (status, _) = h.post("/api/consent", PROF, json!({})).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let activity = json!({"student_id": "alice-1234", "question_id": "q1", "activity": "coding", "at": "2025-01-06T09:00:00Z"});
    let (status, _) = h.post("/api/activity", ALICE, activity.clone()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = h.post("/api/activity", INGEST, activity).await;
    assert_eq!(status, StatusCode::ACCEPTED);
}

#[tokio::test]
async fn malformed_bodies_get_a_json_error() {
    let h = harness();
    h.post("/api/consent", ALICE, json!({})).await;
    let (status, body) = h
        .post(
            "/api/hint-requests",
            ALICE,
            json!({"hint_type": "nonsense"}),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_body");
    let (status, body) = h
        .call(Method::POST, "/api/hint-requests", Some(ALICE), None)
        .await;
    assert_eq!(status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    assert_eq!(body["code"], "invalid_body");
}

#[tokio::test]
async fn empty_queue_is_an_empty_success() {
    let h = harness();
    let (status, body) = h.get("/api/instructor/next", PROF).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(body, Value::Null);
}

#[tokio::test]
async fn escalation_round_trip() {
    let h = harness();
    let hint_id = h.unhelpful_hint(ALICE).await;
    let (status, body) = h
        .post(
            &format!("/api/hints/{hint_id}/escalation"),
            ALICE,
            json!({"note": "the hint points at the wrong line"}),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(body["message"].as_str().unwrap().contains("24 hours"));
    let (status, body) = h
        .post(
            &format!("/api/hints/{hint_id}/escalation"),
            ALICE,
            json!({}),
        )
        .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("duplicate_escalation"))
    );

    let (status, context) = h.get("/api/instructor/next", PROF).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!context.to_string().contains("alice"));
    assert_eq!(
        context["task_description"],
        "Count the rows with a price above 10."
    );
    assert_eq!(context["student_note"], "the hint points at the wrong line");
    let escalation_id = context["escalation"]["escalation_id"]
        .as_str()
        .unwrap()
        .to_owned();

    // Another instructor cannot take or answer it while leased.
    let (status, _) = h.get("/api/instructor/next", TA).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let path = format!("/api/instructor/escalations/{escalation_id}/feedback");
    let (status, body) = h.post(&path, TA, json!({"text": "check the filter"})).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("not_lease_holder"))
    );
    let (status, body) = h.post(&path, PROF, json!({"text": "   "})).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("empty_feedback"))
    );
    let (status, _) = h
        .post(
            &path,
            PROF,
            json!({"text": "Your filter compares strings; convert price first."}),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);

    let (_, view) = h.get("/api/questions/q1/hints", ALICE).await;
    let entry = &view["entries"][0];
    assert_eq!(
        entry["feedback"]["text"],
        "Your filter compares strings; convert price first."
    );
    assert!(entry["feedback"]
        .get("instructor_id")
        .is_none_or(Value::is_null));
    assert!(!view.to_string().contains("prof"));

    h.settle_notifications().await;
    let jobs = h.jobs.jobs();
    assert_eq!(jobs.len(), 2);
    assert_eq!(jobs[0].kind, JobKind::NewEscalation);
    assert_eq!(jobs[1].kind, JobKind::FeedbackAvailable);
    assert!(jobs
        .iter()
        .all(|j| j.delivery_state == DeliveryState::Sent && j.attempts == 1));
    for message in h.notifier.sent() {
        let text = format!("{} {}", message.subject, message.body);
        assert!(!text.contains("alice") && !text.contains("prof"), "{text}");
    }
}

#[tokio::test]
async fn release_returns_the_case_to_the_queue() {
    let h = harness();
    let hint_id = h.unhelpful_hint(ALICE).await;
    h.post(
        &format!("/api/hints/{hint_id}/escalation"),
        ALICE,
        json!({}),
    )
    .await;
    let (_, context) = h.get("/api/instructor/next", PROF).await;
    let id = context["escalation"]["escalation_id"].as_str().unwrap();
    let path = format!("/api/instructor/escalations/{id}/release");
    let (status, _) = h.call(Method::POST, &path, Some(TA), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = h.call(Method::POST, &path, Some(PROF), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, again) = h.get("/api/instructor/next", TA).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["escalation"]["escalation_id"], id);
    assert_eq!(again["escalation"]["status"], "viewed");
}

#[tokio::test]
async fn leases_expire() {
    let h = harness();
    let hint_id = h.unhelpful_hint(ALICE).await;
    h.post(
        &format!("/api/hints/{hint_id}/escalation"),
        ALICE,
        json!({}),
    )
    .await;
    h.get("/api/instructor/next", PROF).await;
    h.clock.advance(chrono::TimeDelta::minutes(31));
    let (status, _) = h.get("/api/instructor/next", TA).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn helpful_hints_cannot_be_escalated() {
    let h = harness();
    h.post("/api/consent", BOB, json!({})).await;
    let (_, created) = h.request_hint(BOB, "optimization").await;
    let done = h
        .wait_for(BOB, created["request_id"].as_str().unwrap())
        .await;
    let hint_id = done["entry"]["hint"]["hint_id"].as_str().unwrap();
    h.post(
        &format!("/api/hints/{hint_id}/rating"),
        BOB,
        json!({"rating": "helpful"}),
    )
    .await;
    let (status, body) = h
        .post(&format!("/api/hints/{hint_id}/escalation"), BOB, json!({}))
        .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("not_unhelpful"))
    );
    let (status, body) = h
        .post(
            &format!("/api/hints/{hint_id}/rating"),
            BOB,
            json!({"rating": "unhelpful"}),
        )
        .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("already_rated"))
    );
}

#[tokio::test]
async fn annotations_are_stored() {
    let h = harness();
    let hint_id = h.unhelpful_hint(ALICE).await;
    let body = json!({
        "target": {"hint": hint_id},
        "bug_types": ["semantic_bug"],
        "unhelpful_reasons": ["incorrect"],
    });
    let (status, case) = h.post("/api/instructor/annotations", PROF, body).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(case["annotator"], "prof");
    let body = json!({"target": {"hint": hint_id}, "bug_types": ["semantic_bug"], "unhelpful_reasons": []});
    let (status, err) = h.post("/api/instructor/annotations", PROF, body).await;
    assert_eq!(
        (status, err["code"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("empty_reason_set"))
    );
}

#[tokio::test]
async fn health_reports_counts() {
    let h = harness();
    let (status, body) = h.call(Method::GET, "/api/health", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["events"], 0);
}
