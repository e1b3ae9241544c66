//! Bearer tokens, one per user, each bound to a role.

use std::collections::HashMap;

use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use hintdesk_core::{InstructorId, StudentId};
use serde::{Deserialize, Serialize};

use crate::app::AppState;
use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Instructor,
    Ingest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub token: String,
    pub role: Role,
    /// Student or instructor id; unused for ingest tokens.
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Principal {
    Student(StudentId),
    Instructor(InstructorId),
    Ingest,
}

#[derive(Debug, Clone, Default)]
pub struct Tokens(HashMap<String, Principal>);

impl Tokens {
    pub fn new(entries: &[TokenEntry]) -> Result<Self, String> {
        let mut map = HashMap::new();
        for entry in entries {
            if entry.token.len() < 16 {
                return Err("tokens must be at least 16 characters".into());
            }
            let id = || match entry.id.as_deref().map(str::trim) {
                Some(id) if !id.is_empty() => Ok(id.to_owned()),
                _ => Err(format!("{:?} token needs an id", entry.role)),
            };
            let principal = match entry.role {
                Role::Student => Principal::Student(id()?.into()),
                Role::Instructor => Principal::Instructor(id()?.into()),
                Role::Ingest => Principal::Ingest,
            };
            if map.insert(entry.token.clone(), principal).is_some() {
                return Err("duplicate token".into());
            }
        }
        Ok(Self(map))
    }

    pub fn resolve(&self, token: &str) -> Option<&Principal> {
        self.0.get(token)
    }
}

fn principal(parts: &Parts, state: &AppState) -> Result<Principal, ApiError> {
    let header = parts
        .headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let token = header
        .strip_prefix("Bearer ")
        .map(str::trim)
        .ok_or_else(ApiError::unauthorized)?;
    state
        .tokens
        .resolve(token)
        .cloned()
        .ok_or_else(ApiError::unauthorized)
}

pub struct StudentAuth(pub StudentId);
pub struct InstructorAuth(pub InstructorId);
pub struct IngestAuth;

impl FromRequestParts<AppState> for StudentAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        match principal(parts, state)? {
            Principal::Student(id) => Ok(Self(id)),
            _ => Err(ApiError::forbidden()),
        }
    }
}

impl FromRequestParts<AppState> for InstructorAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        match principal(parts, state)? {
            Principal::Instructor(id) => Ok(Self(id)),
            _ => Err(ApiError::forbidden()),
        }
    }
}

impl FromRequestParts<AppState> for IngestAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        match principal(parts, state)? {
            Principal::Ingest => Ok(Self),
            _ => Err(ApiError::forbidden()),
        }
    }
}
