//! HTTP routes.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hintdesk_core::desk::StudentHintEntry;
use hintdesk_core::{
    ActivityPayload, AnnotatedCase, AnnotationTarget, AssignmentId, BugType, EscalationId,
    FeedbackQuality, HelpDesk, HintId, HintType, QuestionId, Rating, RequestDraft, RequestId,
    RequestState, UnhelpfulReason,
};
use hintdesk_pipeline::{fulfil, HintPipeline};
use serde::{Deserialize, Serialize};
use tracing::error;

use crate::auth::{IngestAuth, InstructorAuth, StudentAuth, Tokens};
use crate::error::{ApiError, Body};
use crate::notify::JobBook;

pub const GENERATING_NOTICE: &str = "Hints may take up to two minutes to generate.";

#[derive(Clone)]
pub struct AppState {
    pub desk: Arc<HelpDesk>,
    pub pipeline: Arc<HintPipeline>,
    pub tokens: Arc<Tokens>,
    pub jobs: JobBook,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/consent", post(consent))
        .route("/api/hint-requests", post(create_request))
        .route("/api/hint-requests/{request_id}", get(request_status))
        .route("/api/hints/{hint_id}/rating", post(rate))
        .route("/api/hints/{hint_id}/escalation", post(escalate))
        .route("/api/questions/{question_id}/hints", get(student_hints))
        .route("/api/instructor/next", get(next_escalation))
        .route(
            "/api/instructor/escalations/{escalation_id}/feedback",
            post(feedback),
        )
        .route(
            "/api/instructor/escalations/{escalation_id}/release",
            post(release),
        )
        .route("/api/instructor/annotations", post(annotate))
        .route("/api/activity", post(activity))
        .with_state(state)
}

type ApiResult<T> = Result<T, ApiError>;

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    let (events, open, generating) = state.desk.read(|s| {
        (
            s.last_seq(),
            s.escalations().filter(|e| e.is_unresolved()).count(),
            s.requests().filter(|r| r.state.is_in_flight()).count(),
        )
    });
    Json(serde_json::json!({
        "status": "ok",
        "events": events,
        "unresolved_escalations": open,
        "generating": generating,
        "notifications_pending": state.jobs.pending(),
    }))
}

async fn consent(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
) -> ApiResult<impl IntoResponse> {
    let profile = state.desk.record_consent(&student)?;
    Ok(Json(
        serde_json::json!({ "consent_given": profile.consent_given() }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewRequest {
    pub assignment_id: AssignmentId,
    pub question_id: QuestionId,
    pub hint_type: HintType,
    #[serde(default)]
    pub comment: Option<String>,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestStatus {
    pub request_id: RequestId,
    /// `generating`, `delivered` or `failed`.
    pub status: String,
    pub state: RequestState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<StudentHintEntry>,
}

fn status_of(
    request_id: RequestId,
    state: RequestState,
    entry: Option<StudentHintEntry>,
) -> RequestStatus {
    let status = match state {
        RequestState::Created | RequestState::Generating => "generating",
        RequestState::Failed => "failed",
        _ => "delivered",
    };
    let message = match status {
        "generating" => Some(GENERATING_NOTICE.to_owned()),
        "failed" => {
            Some("Hint generation failed. Your quota was not used; you can ask again.".to_owned())
        }
        _ => None,
    };
    RequestStatus {
        request_id,
        status: status.into(),
        state,
        message,
        entry,
    }
}

async fn create_request(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
    Body(body): Body<NewRequest>,
) -> ApiResult<impl IntoResponse> {
    let draft = RequestDraft {
        assignment_id: body.assignment_id,
        question_id: body.question_id,
        hint_type: body.hint_type,
        comment: body.comment.filter(|c| !c.trim().is_empty()),
        code: body.code,
    };
    let request = state.desk.create_help_request(&student, draft)?;
    let id = request.request_id.clone();
    let (desk, pipeline) = (state.desk.clone(), state.pipeline.clone());
    tokio::spawn(async move {
        if let Err(e) = fulfil(&desk, &pipeline, &id).await {
            error!(request = %id, error = %e, "could not record generation outcome");
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(status_of(request.request_id, request.state, None)),
    ))
}

async fn request_status(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
    Path(request_id): Path<RequestId>,
) -> ApiResult<Json<RequestStatus>> {
    let request = state
        .desk
        .request_for_student(&student, &request_id)
        .ok_or_else(|| hintdesk_core::Error::UnknownRequest(request_id.to_string()))?;
    let entry = state
        .desk
        .student_hints(&student, &request.question_id)
        .entries
        .into_iter()
        .find(|e| e.request_id == request_id);
    Ok(Json(status_of(request_id, request.state, entry)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingBody {
    pub rating: Rating,
}

async fn rate(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
    Path(hint_id): Path<HintId>,
    Body(body): Body<RatingBody>,
) -> ApiResult<impl IntoResponse> {
    let hint = state.desk.rate_hint(&student, &hint_id, body.rating)?;
    Ok(Json(
        serde_json::json!({ "hint_id": hint.hint_id, "rating": hint.rating }),
    ))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscalationBody {
    #[serde(default)]
    pub note: Option<String>,
}

async fn escalate(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
    Path(hint_id): Path<HintId>,
    Body(body): Body<EscalationBody>,
) -> ApiResult<impl IntoResponse> {
    let escalation = state.desk.escalate(&student, &hint_id, body.note)?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({
            "escalation_id": escalation.escalation_id,
            "status": escalation.status,
            "message": "Your request was sent to the instructors. Feedback usually arrives within 24 hours.",
        })),
    ))
}

async fn student_hints(
    State(state): State<AppState>,
    StudentAuth(student): StudentAuth,
    Path(question_id): Path<QuestionId>,
) -> impl IntoResponse {
    Json(state.desk.student_hints(&student, &question_id))
}

async fn next_escalation(
    State(state): State<AppState>,
    InstructorAuth(instructor): InstructorAuth,
) -> ApiResult<Response> {
    Ok(match state.desk.next_unresolved(&instructor)? {
        Some(context) => Json(context).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackBody {
    pub text: String,
}

async fn feedback(
    State(state): State<AppState>,
    InstructorAuth(instructor): InstructorAuth,
    Path(escalation_id): Path<EscalationId>,
    Body(body): Body<FeedbackBody>,
) -> ApiResult<impl IntoResponse> {
    let feedback = state
        .desk
        .submit_feedback(&instructor, &escalation_id, &body.text)?;
    Ok((StatusCode::CREATED, Json(feedback)))
}

async fn release(
    State(state): State<AppState>,
    InstructorAuth(instructor): InstructorAuth,
    Path(escalation_id): Path<EscalationId>,
) -> ApiResult<StatusCode> {
    state.desk.release_claim(&instructor, &escalation_id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationBody {
    pub target: AnnotationTarget,
    #[serde(default)]
    pub bug_types: BTreeSet<BugType>,
    #[serde(default)]
    pub unhelpful_reasons: BTreeSet<UnhelpfulReason>,
    #[serde(default)]
    pub feedback_quality: Option<FeedbackQuality>,
}

async fn annotate(
    State(state): State<AppState>,
    InstructorAuth(instructor): InstructorAuth,
    Body(body): Body<AnnotationBody>,
) -> ApiResult<(StatusCode, Json<AnnotatedCase>)> {
    let case = state.desk.annotate(
        &body.target,
        body.bug_types,
        body.unhelpful_reasons,
        body.feedback_quality,
        instructor.as_str(),
    )?;
    Ok((StatusCode::CREATED, Json(case)))
}

async fn activity(
    State(state): State<AppState>,
    _: IngestAuth,
    Body(body): Body<ActivityPayload>,
) -> ApiResult<StatusCode> {
    state.desk.record_activity(body)?;
    Ok(StatusCode::ACCEPTED)
}
