//! REST routes over a shared [`Platform`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::Value;
use slant_core::aggregation::{write_jsonl, ExportFilter};
use slant_core::content::{NewSentence, Scope, Topic};
use slant_core::engine::{Answer, DemographicSurvey};
use slant_core::metrics::{DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use slant_core::platform::{Command, CritiqueDecision, Platform, PurchaseItem, Response};
use slant_core::types::{Mode, Origin, PlayerId, RoundId, SentenceId, SentenceLabel, TopicId};

use crate::error::ApiError;

pub const REQUEST_ID: &str = "x-request-id";

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub curator_token: String,
    /// Requests allowed per token per clock minute.
    pub rate_cap: u32,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self { curator_token: "curator".into(), rate_cap: 120 }
    }
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

struct Shared {
    platform: Mutex<Platform>,
    config: ApiConfig,
    windows: Mutex<BTreeMap<String, (i64, u32)>>,
}

impl AppState {
    pub fn new(platform: Platform, config: ApiConfig) -> Self {
        Self { shared: Arc::new(Shared { platform: Mutex::new(platform), config, windows: Mutex::new(BTreeMap::new()) }) }
    }

    pub fn platform(&self) -> MutexGuard<'_, Platform> {
        // a panicking handler cannot leave the platform half-applied: every command is logged first
        self.shared.platform.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn admit(&self, token: &str, minute: i64) -> Result<(), ApiError> {
        let mut windows = self.shared.windows.lock().unwrap_or_else(|e| e.into_inner());
        let entry = windows.entry(token.to_owned()).or_insert((minute, 0));
        if entry.0 != minute {
            *entry = (minute, 0);
        }
        if entry.1 >= self.shared.config.rate_cap {
            return Err(ApiError::rate_limited());
        }
        entry.1 += 1;
        Ok(())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/players", post(register))
        .route("/players/me", get(me))
        .route("/players/me/paper", get(paper))
        .route("/players/me/paper/collect", post(collect_all))
        .route("/players/me/paper/{sentence}/collect", post(collect))
        .route("/rounds", post(start_round))
        .route("/rounds/{id}", get(round))
        .route("/rounds/{id}/sentence", post(submit))
        .route("/rounds/{id}/tap", post(tap))
        .route("/rounds/{id}/critique", post(critique))
        .route("/rounds/{id}/finish", post(finish))
        .route("/topics", get(topics))
        .route("/purchases", post(purchase))
        .route("/tutorial/{level}", get(tutorial).post(tutorial_submit))
        .route("/assessment", get(assessment).post(assessment_submit))
        .route("/mission", get(mission))
        .route("/content/topics", post(add_topic))
        .route("/content/sentences", post(add_sentence))
        .route("/content/import", post(import))
        .route("/content/breaking-news", post(breaking_news))
        .route("/export/dataset", get(export_dataset))
        .route("/export/metrics", get(export_metrics))
        .route("/export/histogram", get(export_histogram))
        .with_state(state)
}

fn bearer(parts: &Parts) -> Result<String, ApiError> {
    parts
        .headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::to_owned)
        .ok_or_else(|| ApiError::from(slant_core::platform::PlatformError::Unauthorized("missing bearer token".into())))
}

/// The authenticated player behind the bearer token.
pub struct Auth(pub PlayerId);

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = bearer(parts)?;
        let platform = state.platform();
        let now = platform.now();
        let player = platform.authenticate(&token, now)?;
        drop(platform);
        state.admit(&token, now.timestamp().div_euclid(60))?;
        Ok(Auth(player))
    }
}

/// A request carrying the curator credential.
pub struct Curator;

impl FromRequestParts<AppState> for Curator {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = bearer(parts)?;
        if token != state.shared.config.curator_token {
            return Err(slant_core::platform::PlatformError::Unauthorized("curator credential required".into()).into());
        }
        Ok(Curator)
    }
}

/// The client-supplied idempotency key, if any.
pub struct RequestId(pub Option<String>);

impl<S: Send + Sync> FromRequestParts<S> for RequestId {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, ApiError> {
        match parts.headers.get(REQUEST_ID) {
            None => Ok(RequestId(None)),
            Some(v) => v
                .to_str()
                .map(|s| RequestId(Some(s.to_owned())))
                .map_err(|_| ApiError::bad_request("x-request-id must be visible ASCII")),
        }
    }
}

/// The payload of a response, without its variant tag.
fn body(r: Response) -> Json<Value> {
    let mut v = serde_json::to_value(r).expect("responses serialize");
    Json(v.get_mut("body").map(Value::take).unwrap_or(v))
}

fn run(state: &AppState, request: RequestId, command: Command) -> Result<Json<Value>, ApiError> {
    Ok(body(state.platform().execute(request.0, command)?))
}

async fn register(
    State(state): State<AppState>,
    request: RequestId,
    Json(survey): Json<DemographicSurvey>,
) -> Result<Json<Value>, ApiError> {
    let mut platform = state.platform();
    // a retried registration reuses the token of the first attempt
    let token = match request.0.as_deref().and_then(|id| platform.command_for(id)) {
        Some(Command::Register { token, .. }) => token.clone(),
        _ => uuid::Uuid::new_v4().simple().to_string(),
    };
    Ok(body(platform.execute(request.0, Command::Register { survey, token })?))
}

async fn me(State(state): State<AppState>, Auth(player): Auth) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(state.platform().player_view(player)?).unwrap()))
}

#[derive(Deserialize)]
struct PaperQuery {
    #[serde(default)]
    unresolved: bool,
}

async fn paper(
    State(state): State<AppState>,
    Auth(player): Auth,
    Query(q): Query<PaperQuery>,
) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(state.platform().paper(player, q.unresolved)?).unwrap()))
}

async fn collect(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(sentence): Path<u64>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::CollectFeedback { player, sentence: Some(SentenceId(sentence)) })
}

async fn collect_all(State(state): State<AppState>, Auth(player): Auth, request: RequestId) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::CollectFeedback { player, sentence: None })
}

#[derive(Deserialize)]
struct StartRound {
    mode: Mode,
    scope: Scope,
}

async fn start_round(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Json(b): Json<StartRound>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::StartRound { player, mode: b.mode, scope: b.scope })
}

async fn round(State(state): State<AppState>, Auth(player): Auth, Path(id): Path<u64>) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(state.platform().round_view(player, RoundId(id))?).unwrap()))
}

#[derive(Deserialize)]
struct Submit {
    sentence: SentenceId,
    label: Option<SentenceLabel>,
    #[serde(default)]
    marks: BTreeSet<usize>,
}

async fn submit(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(id): Path<u64>,
    Json(b): Json<Submit>,
) -> Result<Json<Value>, ApiError> {
    let command = Command::SubmitSentence { player, round: RoundId(id), sentence: b.sentence, label: b.label, marks: b.marks };
    run(&state, request, command)
}

#[derive(Deserialize)]
struct Tap {
    sentence: SentenceId,
    token: usize,
}

async fn tap(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(id): Path<u64>,
    Json(b): Json<Tap>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::Tap { player, round: RoundId(id), sentence: b.sentence, token: b.token })
}

#[derive(Deserialize)]
struct Critique {
    sentence: SentenceId,
    #[serde(flatten)]
    decision: CritiqueDecision,
}

async fn critique(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(id): Path<u64>,
    Json(b): Json<Critique>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::Critique { player, round: RoundId(id), sentence: b.sentence, decision: b.decision })
}

async fn finish(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(id): Path<u64>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::FinishRound { player, round: RoundId(id) })
}

async fn topics(State(state): State<AppState>, Auth(player): Auth) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(state.platform().topics(player)?).unwrap()))
}

async fn purchase(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Json(item): Json<PurchaseItem>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::Purchase { player, item })
}

async fn tutorial(State(state): State<AppState>, Auth(_): Auth, Path(level): Path<u32>) -> Result<Json<Value>, ApiError> {
    let view = state
        .platform()
        .tutorial_level(level)
        .ok_or_else(|| ApiError::new(axum::http::StatusCode::NOT_FOUND, "UnknownLevel", format!("no tutorial level {level}")))?;
    Ok(Json(serde_json::to_value(view).unwrap()))
}

#[derive(Deserialize)]
struct Answers<T> {
    answers: Vec<T>,
}

async fn tutorial_submit(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Path(level): Path<u32>,
    Json(b): Json<Answers<Answer>>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::TutorialSubmit { player, level, answers: b.answers })
}

/// Creates the assessment set on first call and returns the same set afterwards.
async fn assessment(State(state): State<AppState>, Auth(player): Auth, request: RequestId) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::StartAssessment { player })
}

async fn assessment_submit(
    State(state): State<AppState>,
    Auth(player): Auth,
    request: RequestId,
    Json(b): Json<Answers<SentenceLabel>>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::SubmitAssessment { player, answers: b.answers })
}

async fn mission(State(state): State<AppState>, Auth(_): Auth) -> Json<Value> {
    Json(serde_json::to_value(state.platform().mission()).unwrap())
}

async fn add_topic(
    State(state): State<AppState>,
    _: Curator,
    request: RequestId,
    Json(topic): Json<Topic>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::AddTopic { topic })
}

async fn add_sentence(
    State(state): State<AppState>,
    _: Curator,
    request: RequestId,
    Json(sentence): Json<NewSentence>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::IngestSentence { sentence })
}

/// Body is the baseline CSV itself.
async fn import(State(state): State<AppState>, _: Curator, request: RequestId, csv: String) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::ImportBaseline { csv })
}

#[derive(Deserialize)]
struct BreakingNews {
    sentence_ids: Vec<SentenceId>,
}

async fn breaking_news(
    State(state): State<AppState>,
    _: Curator,
    request: RequestId,
    Json(b): Json<BreakingNews>,
) -> Result<Json<Value>, ApiError> {
    run(&state, request, Command::InjectBreakingNews { sentence_ids: b.sentence_ids })
}

#[derive(Deserialize, Default)]
struct ExportQuery {
    min_annotations: Option<u32>,
    /// Comma-separated topic ids.
    topics: Option<String>,
    min_skill: Option<f64>,
    include_baseline: Option<bool>,
}

async fn export_dataset(State(state): State<AppState>, _: Curator, Query(q): Query<ExportQuery>) -> impl IntoResponse {
    let filter = ExportFilter {
        min_annotations: q.min_annotations,
        topics: q.topics.map(|t| t.split(',').filter(|s| !s.is_empty()).map(TopicId::new).collect()),
        min_skill: q.min_skill,
        include_baseline: q.include_baseline,
    };
    let records = state.platform().export_dataset(&filter);
    let mut out = Vec::new();
    write_jsonl(&records, &mut out).expect("writing to memory");
    ([(CONTENT_TYPE, "application/x-ndjson")], out)
}

#[derive(Deserialize)]
struct MetricsQuery {
    origin: Option<Origin>,
    resamples: Option<usize>,
    seed: Option<u64>,
    level: Option<f64>,
}

fn metrics_args(q: &MetricsQuery) -> (usize, u64, f64) {
    (q.resamples.unwrap_or(DEFAULT_RESAMPLES), q.seed.unwrap_or(0), q.level.unwrap_or(DEFAULT_LEVEL))
}

async fn export_metrics(State(state): State<AppState>, _: Curator, Query(q): Query<MetricsQuery>) -> Json<Value> {
    let (resamples, seed, level) = metrics_args(&q);
    let data = state.platform().reliability_data(q.origin);
    // bootstrapping can take a while; keep it off the platform lock
    let report = tokio::task::spawn_blocking(move || {
        slant_core::metrics::MetricsReport::compute(&data, resamples, seed, level)
    })
    .await
    .expect("metrics task");
    Json(serde_json::to_value(report).unwrap())
}

/// The bootstrap distribution as `resample_index,alpha` CSV.
async fn export_histogram(
    State(state): State<AppState>,
    _: Curator,
    Query(q): Query<MetricsQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let (resamples, seed, level) = metrics_args(&q);
    let data = state.platform().reliability_data(q.origin);
    let result = tokio::task::spawn_blocking(move || slant_core::metrics::bootstrap_alpha(&data, resamples, seed, level))
        .await
        .expect("bootstrap task")
        .map_err(|e| ApiError::new(axum::http::StatusCode::CONFLICT, e.flag(), e.to_string()))?;
    let mut out = Vec::new();
    result.write_histogram_csv(&mut out).expect("writing to memory");
    Ok(([(CONTENT_TYPE, "text/csv")], out))
}
