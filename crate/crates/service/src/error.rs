use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("session is complete")]
    Completed,
    #[error("round {got} was already played")]
    DuplicateRound { got: usize },
    #[error("expected round {expected}, got {got}")]
    UnexpectedRound { expected: usize, got: usize },
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] poachlab_core::Error),
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: String,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::Completed | ServiceError::DuplicateRound { .. } => StatusCode::CONFLICT,
            ServiceError::UnknownPreset(_)
            | ServiceError::UnexpectedRound { .. }
            | ServiceError::BadRequest(_)
            | ServiceError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownPreset(_) => "unknown_preset",
            ServiceError::Completed => "session_complete",
            ServiceError::DuplicateRound { .. } => "duplicate_round",
            ServiceError::UnexpectedRound { .. } => "unexpected_round",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Core(_) => "invalid",
            ServiceError::Storage(_) => "storage",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if let ServiceError::Storage(e) = &self {
            log::error!("storage failure: {e}");
        }
        let body = ErrorBody { error: ErrorDetail { code: self.code(), message: self.to_string() } };
        (self.status(), Json(body)).into_response()
    }
}
