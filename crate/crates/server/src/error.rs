use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use slant_core::platform::PlatformError;

/// The JSON error body every route returns on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub retryable: bool,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_owned(), message: message.into(), retryable: status.is_server_error(), status: status.as_u16() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "ValidationFailed", message)
    }

    pub fn rate_limited() -> Self {
        Self { retryable: true, ..Self::new(StatusCode::TOO_MANY_REQUESTS, "RateLimited", "request cap reached, retry shortly") }
    }
}

/// HTTP status for a platform error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "Unauthorized" => StatusCode::UNAUTHORIZED,
        "UnknownPlayer" | "UnknownTopic" | "UnknownSentence" | "UnknownRound" | "UnknownAnnotation" => {
            StatusCode::NOT_FOUND
        }
        "ValidationFailed" | "EmptyText" | "FormatError" | "UnresolvedWord" | "InvalidTopic" | "InvalidToken"
        | "StopwordMarked" | "MissingLabel" | "WrongLevelContent" | "WrongMode" | "Config" => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        "InsufficientFunds" => StatusCode::PAYMENT_REQUIRED,
        "ModeLocked" | "TopicLocked" | "TutorialIncomplete" | "SelfCritique" => StatusCode::FORBIDDEN,
        "QuotaExhausted" => StatusCode::TOO_MANY_REQUESTS,
        "Storage" => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::CONFLICT,
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        let code = e.code();
        let status = status_for(&code);
        Self { message: e.to_string(), retryable: e.retryable(), status: status.as_u16(), code }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
