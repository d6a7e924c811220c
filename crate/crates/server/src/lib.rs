//! HTTP service and offline tools for the annotation game.
//!
//! [`api::router`] exposes a [`slant_core::platform::Platform`] over JSON
//! routes; [`cli`] holds the study simulator and dataset export used by the
//! `slant` binary.

pub mod api;
pub mod cli;
pub mod error;

pub use api::{router, ApiConfig, AppState};
pub use error::ApiError;
