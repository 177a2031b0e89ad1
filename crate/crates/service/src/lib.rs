//! HTTP API over the layout model: one-shot prediction plus queued
//! optimization jobs whose traces can be polled step by step.

mod jobs;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use layoutforge_core::layout::Layout;
use layoutforge_core::model::ModelParams;
use layoutforge_core::optimizer::{objective, ConstraintSpec, OptimizerConfig, PenaltyConfig, PenaltyValues};
use layoutforge_core::tasks::TaskSequence;
use layoutforge_core::Error as CoreError;

pub use jobs::{JobState, JobView, Registry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Jobs optimizing at the same time.
    pub max_concurrent_jobs: usize,
    /// Jobs allowed to wait behind the running ones.
    pub max_queued_jobs: usize,
    /// Step count when a request does not give one.
    pub default_steps: usize,
    /// Finished traces are written to `<trace_root>/<job id>/`.
    pub trace_root: PathBuf,
    /// Base optimizer settings; requests may override `steps`.
    pub optimizer: OptimizerConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_concurrent_jobs: 1,
            max_queued_jobs: 16,
            default_steps: 500,
            trace_root: PathBuf::from("traces"),
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub params: Arc<ModelParams<f64>>,
    pub config: Arc<ServiceConfig>,
    pub jobs: Registry,
}

impl AppState {
    /// Builds the state and starts the job workers on the current runtime.
    pub fn start(params: ModelParams<f64>, config: ServiceConfig) -> Self {
        let params = Arc::new(params);
        let config = Arc::new(config);
        let jobs = Registry::start(params.clone(), config.clone());
        Self { params, config, jobs }
    }
}

/// JSON error body with the matching status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match &e {
            CoreError::UnknownLabel(_)
            | CoreError::UnknownElement(_)
            | CoreError::UnknownConstraintTarget(_)
            | CoreError::MissingDestination(_)
            | CoreError::InvalidTask(_)
            | CoreError::InfeasibleLayout(_)
            | CoreError::EmptyLayout
            | CoreError::DegenerateContainer(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CoreError::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Parses a request body, mapping any syntax or schema problem to 400.
fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request: {e}")))
}

#[derive(Debug, Clone, Deserialize)]
pub struct PredictRequest {
    pub layout: Layout,
    pub sequence: TaskSequence,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub per_task: Vec<f64>,
    pub total: f64,
    pub feasible: bool,
    pub penalty_values: PenaltyValues,
    pub objective: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OptimizeRequest {
    pub layout: Layout,
    pub sequence: TaskSequence,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResponse {
    pub job_id: String,
}

fn penalties_for(constraints: Vec<ConstraintSpec>) -> PenaltyConfig {
    PenaltyConfig { constraints, ..PenaltyConfig::default() }
}

async fn predict(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<PredictResponse>> {
    let req: PredictRequest = parse(&body)?;
    let penalties = penalties_for(req.constraints);
    penalties.validate(&req.layout)?;
    req.sequence.validate_against(&req.layout)?;
    let value = objective(&req.layout, &req.sequence, &state.params, &penalties)?;
    Ok(Json(PredictResponse {
        total: value.per_task.iter().sum(),
        per_task: value.per_task,
        feasible: value.penalties.is_feasible(),
        penalty_values: value.penalties,
        objective: value.objective,
    }))
}

async fn submit(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<OptimizeResponse>)> {
    let req: OptimizeRequest = parse(&body)?;
    let penalties = penalties_for(req.constraints);
    // reject bad input now rather than as a failed job
    penalties.validate(&req.layout)?;
    req.sequence.validate_against(&req.layout)?;
    let report = layoutforge_core::layout::validate_layout(&req.layout);
    if !report.is_empty() {
        return Err(CoreError::InfeasibleLayout(report.summary()).into());
    }
    layoutforge_core::model::predict_sequence(&req.layout, &req.sequence, &state.params)?;
    let steps = req.steps.unwrap_or(state.config.default_steps);
    let job_id = state.jobs.submit(req.layout, req.sequence, penalties, steps).map_err(|msg| ApiError::new(StatusCode::CONFLICT, msg))?;
    Ok((StatusCode::ACCEPTED, Json(OptimizeResponse { job_id })))
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobView>> {
    state.jobs.view(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}

async fn step_css(State(state): State<AppState>, Path((id, n)): Path<(String, usize)>) -> ApiResult<Response> {
    let css = state.jobs.with_step(&id, n, |s| s.css.clone()).ok_or_else(|| ApiError::not_found(format!("no step {n} for job {id}")))?;
    Ok(([(header::CONTENT_TYPE, "text/css")], css).into_response())
}

async fn step_layout(State(state): State<AppState>, Path((id, n)): Path<(String, usize)>) -> ApiResult<Json<Layout>> {
    state.jobs.with_step(&id, n, |s| s.layout.clone()).map(Json).ok_or_else(|| ApiError::not_found(format!("no step {n} for job {id}")))
}

async fn best_layout(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Layout>> {
    state.jobs.best_layout(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("no recorded steps for job {id}")))
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/optimize", post(submit))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/best", get(best_layout))
        .route("/jobs/{id}/steps/{n}/css", get(step_css))
        .route("/jobs/{id}/steps/{n}/layout", get(step_layout))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
