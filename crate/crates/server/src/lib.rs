//! HTTP service exposing the sandbox tools, the episode runner, the
//! evaluator, and the report renderer.
//!
//! Everything stateful lives in [`AppState`]; handlers are thin
//! translations between wire types and core calls. Episode execution
//! happens on an isolated task, so one panicking run degrades to an
//! undelivered trace instead of a 500.

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use std::sync::Arc;
use waypoint_core::agents::prompts::PromptSet;
use waypoint_core::api::{
    CitySearchRequest, EpisodeRequest, EpisodeResponse, ErrorBody, EvaluateRequest,
    EvaluateResponse, FlightSearchRequest, HealthResponse, ReportRequest, ReportResponse,
    ToolResponse, EPISODES_PATH, EVALUATE_PATH, HEALTH_PATH, REPORT_PATH, TOOLS_PREFIX,
};
use waypoint_core::experiment::{build_evaluation, render_report, run_episode_isolated};
use waypoint_core::gateway::{
    BackendKind, ChatBackend, RateLimiter, RecordingBackend, RemoteBackend, ScriptedBackend,
};
use waypoint_core::roles::Domain;
use waypoint_core::sandbox::Sandbox;
use waypoint_core::tools::{
    render_records, ATTRACTION_SEARCH, FLIGHT_SEARCH, HOTEL_SEARCH, RESTAURANT_SEARCH,
    RESTAURANT_SEARCH_ALIAS,
};
use waypoint_core::types::CalendarDate;
use waypoint_core::world::{Goal, ToolRecords};

#[derive(Clone)]
pub struct AppState {
    pub sandbox: Arc<Sandbox>,
    /// Request budget shared by every remote-backed episode this
    /// process runs; None leaves remote calls unthrottled.
    pub limiter: Option<Arc<RateLimiter>>,
}

impl AppState {
    pub fn new(sandbox: Sandbox, requests_per_minute: Option<u32>) -> Self {
        AppState {
            sandbox: Arc::new(sandbox),
            limiter: requests_per_minute.map(|n| Arc::new(RateLimiter::new(n))),
        }
    }
}

pub fn create_app(state: AppState) -> Router {
    let tool = |name: &str| format!("{TOOLS_PREFIX}/{name}");
    Router::new()
        .route(HEALTH_PATH, get(health))
        .route(&tool(FLIGHT_SEARCH), post(flight_search))
        .route(&tool(HOTEL_SEARCH), post(hotel_search))
        .route(&tool(RESTAURANT_SEARCH), post(restaurant_search))
        .route(&tool(RESTAURANT_SEARCH_ALIAS), post(restaurant_search))
        .route(&tool(ATTRACTION_SEARCH), post(attraction_search))
        .route(EPISODES_PATH, post(run_episode))
        .route(EVALUATE_PATH, post(evaluate))
        .route(REPORT_PATH, post(report))
        .with_state(state)
}

/// An error already shaped for the wire. Every handler failure is a
/// client error; genuine server faults surface as panics and are
/// absorbed by the episode isolation layer.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    Json(HealthResponse { status: "ok".into(), sandbox: state.sandbox.stats() })
}

async fn flight_search(
    State(state): State<AppState>,
    Json(request): Json<FlightSearchRequest>,
) -> Result<Json<ToolResponse>, ApiError> {
    let date: CalendarDate = request
        .date
        .parse()
        .map_err(|e| ApiError::bad_request(format!("date: {e}")))?;
    let records =
        ToolRecords::Flights(state.sandbox.flight_search(&request.origin, &request.destination, date));
    Ok(Json(tool_response(Domain::Transportation, records)))
}

async fn hotel_search(
    State(state): State<AppState>,
    Json(request): Json<CitySearchRequest>,
) -> Json<ToolResponse> {
    let records = ToolRecords::Hotels(state.sandbox.hotel_search(&request.city));
    Json(tool_response(Domain::Hotel, records))
}

async fn restaurant_search(
    State(state): State<AppState>,
    Json(request): Json<CitySearchRequest>,
) -> Json<ToolResponse> {
    let records = ToolRecords::Restaurants(state.sandbox.restaurant_search(&request.city));
    Json(tool_response(Domain::Restaurant, records))
}

async fn attraction_search(
    State(state): State<AppState>,
    Json(request): Json<CitySearchRequest>,
) -> Json<ToolResponse> {
    let records = ToolRecords::Attractions(state.sandbox.attraction_search(&request.city));
    Json(tool_response(Domain::Attraction, records))
}

fn tool_response(domain: Domain, records: ToolRecords) -> ToolResponse {
    let rendered = render_records(&records);
    ToolResponse { domain, records, rendered }
}

async fn run_episode(
    State(state): State<AppState>,
    Json(request): Json<EpisodeRequest>,
) -> Result<Json<EpisodeResponse>, ApiError> {
    let goal: Goal = request.task.to_goal().map_err(ApiError::bad_request)?;
    request
        .config
        .backend
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let prompts = PromptSet::with_overrides(&request.prompt_overrides)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;

    let base: Arc<dyn ChatBackend> = match request.config.backend.kind {
        BackendKind::Scripted => {
            let cassette = request
                .cassette
                .clone()
                .ok_or_else(|| ApiError::bad_request("scripted backend requires a cassette"))?;
            Arc::new(ScriptedBackend::new(cassette))
        }
        BackendKind::Remote => {
            let limiter = state.limiter.clone().or_else(|| {
                request
                    .config
                    .backend
                    .requests_per_minute
                    .map(|n| Arc::new(RateLimiter::new(n)))
            });
            Arc::new(
                RemoteBackend::from_config(&request.config.backend, limiter)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?,
            )
        }
    };
    let recorder = request.record.then(|| Arc::new(RecordingBackend::new(base.clone())));
    let backend: Arc<dyn ChatBackend> = match &recorder {
        Some(recording) => recording.clone(),
        None => base,
    };

    let trace = run_episode_isolated(
        goal,
        state.sandbox.clone(),
        backend,
        Arc::new(request.config),
        Arc::new(prompts),
    )
    .await;
    let recorded_cassette = recorder.map(|r| r.cassette());
    Ok(Json(EpisodeResponse { trace, recorded_cassette }))
}

async fn evaluate(
    State(state): State<AppState>,
    Json(request): Json<EvaluateRequest>,
) -> Result<Json<EvaluateResponse>, ApiError> {
    let mut goals = Vec::with_capacity(request.tasks.len());
    for (i, task) in request.tasks.iter().enumerate() {
        goals.push(
            task.to_goal()
                .map_err(|e| ApiError::bad_request(format!("tasks[{i}]: {e}")))?,
        );
    }
    let evaluation = build_evaluation(
        &request.name,
        &goals,
        &request.traces,
        &state.sandbox,
        &request.options,
    )
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(EvaluateResponse { evaluation }))
}

async fn report(Json(request): Json<ReportRequest>) -> Result<Json<ReportResponse>, ApiError> {
    let rendered =
        render_report(&request.evaluations).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(ReportResponse { text: rendered.text, csv: rendered.csv }))
}
