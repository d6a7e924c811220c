use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::content::ContentError;
use crate::engine::{EngineError, FieldError};
use crate::types::PlayerId;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "source", content = "error", rename_all = "snake_case")]
pub enum PlatformError {
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid {}: {}", .0.field, .0.reason)]
    ValidationFailed(FieldError),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("request id {0:?} was already used for a different request")]
    RequestIdReused(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl PlatformError {
    /// Machine-readable code: the name of the underlying error variant.
    pub fn code(&self) -> String {
        match self {
            PlatformError::Content(e) => variant_name(e),
            PlatformError::Aggregation(e) => variant_name(e),
            PlatformError::Engine(e) => variant_name(e),
            PlatformError::ValidationFailed(_) => "ValidationFailed".into(),
            PlatformError::Unauthorized(_) => "Unauthorized".into(),
            PlatformError::UnknownPlayer(_) => "UnknownPlayer".into(),
            PlatformError::RequestIdReused(_) => "RequestIdReused".into(),
            PlatformError::Storage(_) => "Storage".into(),
        }
    }

    pub fn retryable(&self) -> bool {
        matches!(self, PlatformError::Storage(_))
    }
}

// every module error serializes as {"kind": "snake_case_name", ...}
fn variant_name<T: Serialize>(e: &T) -> String {
    let kind = serde_json::to_value(e)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
        .unwrap_or_default();
    kind.split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Mode;

    #[test]
    fn codes_mirror_variant_names() {
        assert_eq!(PlatformError::from(ContentError::QuotaExhausted).code(), "QuotaExhausted");
        assert_eq!(PlatformError::from(EngineError::ModeLocked(Mode::Coop)).code(), "ModeLocked");
        assert_eq!(
            PlatformError::from(EngineError::InsufficientFunds { needed: 80, available: 50 }).code(),
            "InsufficientFunds"
        );
        assert_eq!(PlatformError::from(AggregationError::TutorialIncomplete).code(), "TutorialIncomplete");
        assert!(PlatformError::Storage("disk".into()).retryable());
    }
}
