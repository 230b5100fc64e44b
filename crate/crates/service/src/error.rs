use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use quadba::game::{LegalBounds, Rule};
use quadba::Error;
use serde_json::json;

/// Error body `{"error": {"rule", "detail", "legal_bounds"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub rule: String,
    pub detail: String,
    pub legal_bounds: LegalBounds,
}

impl ApiError {
    pub fn new(status: StatusCode, rule: &str, detail: impl Into<String>) -> Self {
        ApiError { status, rule: rule.into(), detail: detail.into(), legal_bounds: LegalBounds::default() }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no session {id}"))
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "busy", "another move for this session is in flight")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Rule(v) => {
                let status = match v.rule {
                    Rule::Turn | Rule::Finished => StatusCode::CONFLICT,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                ApiError { status, rule: v.rule.name().into(), detail: v.detail, legal_bounds: v.legal_bounds }
            }
            Error::Invariant(d) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "invariant", d),
            e if e.is_resource() => Self::new(StatusCode::INSUFFICIENT_STORAGE, "resource", e.to_string()),
            e => Self::new(StatusCode::BAD_REQUEST, "validation", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": { "rule": self.rule, "detail": self.detail, "legal_bounds": self.legal_bounds }
        });
        (self.status, Json(body)).into_response()
    }
}
