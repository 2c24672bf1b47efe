//! JSON-over-HTTP interface.
//!
//! Worker endpoints live under `/api/workers/{worker}` and require the
//! worker's `x-worker-token` when tokens are configured. Admin endpoints
//! live under `/api/admin` and require `x-admin-token` when one is set.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use routecrowd_core::familiarity::{WorkerId, WorkerProfile};
use routecrowd_core::significance::VisitEvent;
use routecrowd_core::{CandidateSet, GeoPoint, Landmark, LandmarkId, LandmarkRoute, RawRoute};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::Engine;
use crate::error::ServiceError;
use crate::request::RouteRequest;

type AppState = Arc<Engine>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::NotAssigned { .. } => (StatusCode::FORBIDDEN, "not_assigned"),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::WrongQuestion { .. } => (StatusCode::CONFLICT, "wrong_question"),
            ServiceError::TaskClosed(_) => (StatusCode::CONFLICT, "task_closed"),
            ServiceError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            ServiceError::Config(_) => (StatusCode::INTERNAL_SERVER_ERROR, "config"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
        };
        (status, Json(json!({ "error": code, "message": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteInput {
    #[serde(default)]
    pub source: String,
    pub landmarks: Vec<LandmarkId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRouteInput {
    #[serde(default)]
    pub source: String,
    pub points: Vec<GeoPoint>,
}

/// Body of `POST /api/requests`: the request plus its candidate routes,
/// either as landmark ids or as raw points to be snapped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitBody {
    #[serde(flatten)]
    pub request: RouteRequest,
    #[serde(default)]
    pub candidates: Vec<RouteInput>,
    #[serde(default)]
    pub raw_candidates: Vec<RawRouteInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerBody {
    pub landmark: LandmarkId,
    pub yes: bool,
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: u64,
}

fn check_worker(engine: &Engine, headers: &HeaderMap, worker: &str) -> Result<(), ServiceError> {
    let tokens = &engine.config().server.worker_tokens;
    if tokens.is_empty() {
        return Ok(());
    }
    let given = headers.get("x-worker-token").and_then(|v| v.to_str().ok());
    match (tokens.get(worker), given) {
        (Some(expected), Some(given)) if expected == given => Ok(()),
        _ => Err(ServiceError::Unauthorized),
    }
}

fn check_admin(engine: &Engine, headers: &HeaderMap) -> Result<(), ServiceError> {
    match &engine.config().server.admin_token {
        None => Ok(()),
        Some(expected) if headers.get("x-admin-token").and_then(|v| v.to_str().ok()) == Some(expected.as_str()) => Ok(()),
        Some(_) => Err(ServiceError::Unauthorized),
    }
}

fn candidate_set(engine: &Engine, body: &SubmitBody) -> Result<CandidateSet, ServiceError> {
    if body.candidates.is_empty() == body.raw_candidates.is_empty() {
        return Err(ServiceError::InvalidRequest("give exactly one of `candidates` or `raw_candidates`".into()));
    }
    if !body.candidates.is_empty() {
        let routes = body
            .candidates
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let tag = if r.source.is_empty() { format!("r{}", i + 1) } else { r.source.clone() };
                Ok((LandmarkRoute::new(r.landmarks.clone())?, tag))
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        return Ok(CandidateSet::new(routes)?);
    }
    let raw = body
        .raw_candidates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let tag = if r.source.is_empty() { format!("r{}", i + 1) } else { r.source.clone() };
            Ok((tag, RawRoute::new(r.points.clone())?))
        })
        .collect::<Result<Vec<_>, ServiceError>>()?;
    engine.calibrate_candidates(&raw)
}

async fn submit(State(engine): State<AppState>, Json(body): Json<SubmitBody>) -> Result<Response, ServiceError> {
    let candidates = candidate_set(&engine, &body)?;
    let record = engine.submit_request(body.request, candidates)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn request_status(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(engine.request(&id)?).into_response())
}

async fn assignments(State(engine): State<AppState>, headers: HeaderMap, Path(worker): Path<String>) -> Result<Response, ServiceError> {
    check_worker(&engine, &headers, &worker)?;
    Ok(Json(engine.assignments_for(&WorkerId(worker))?).into_response())
}

async fn question(
    State(engine): State<AppState>,
    headers: HeaderMap,
    Path((worker, task)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    check_worker(&engine, &headers, &worker)?;
    Ok(Json(engine.next_question(&task, &WorkerId(worker))?).into_response())
}

async fn answer(
    State(engine): State<AppState>,
    headers: HeaderMap,
    Path((worker, task)): Path<(String, String)>,
    Json(body): Json<AnswerBody>,
) -> Result<Response, ServiceError> {
    check_worker(&engine, &headers, &worker)?;
    Ok(Json(engine.record_answer(&task, &WorkerId(worker), &body.landmark, body.yes)?).into_response())
}

async fn rewards(State(engine): State<AppState>, headers: HeaderMap, Path(worker): Path<String>) -> Result<Response, ServiceError> {
    check_worker(&engine, &headers, &worker)?;
    let points = engine.reward_balance(&WorkerId(worker.clone()))?;
    Ok(Json(json!({ "worker": worker, "points": points })).into_response())
}

async fn admin_landmarks(State(engine): State<AppState>, headers: HeaderMap, Json(body): Json<Vec<Landmark>>) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(json!({ "landmarks": engine.ingest_landmarks(body)? })).into_response())
}

async fn admin_checkins(State(engine): State<AppState>, headers: HeaderMap, Json(body): Json<Vec<VisitEvent>>) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.ingest_checkins(&body)?).into_response())
}

async fn admin_workers(State(engine): State<AppState>, headers: HeaderMap, Json(body): Json<Vec<WorkerProfile>>) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(json!({ "workers": engine.ingest_workers(body)? })).into_response())
}

async fn admin_retrain(State(engine): State<AppState>, headers: HeaderMap) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.retrain()?).into_response())
}

async fn admin_tick(State(engine): State<AppState>, headers: HeaderMap) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.tick()?).into_response())
}

async fn admin_task(State(engine): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.task(&id)?).into_response())
}

async fn admin_truths(State(engine): State<AppState>, headers: HeaderMap) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.truths()?).into_response())
}

async fn admin_events(State(engine): State<AppState>, headers: HeaderMap, Query(q): Query<EventsQuery>) -> Result<Response, ServiceError> {
    check_admin(&engine, &headers)?;
    Ok(Json(engine.events(q.from)?).into_response())
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/requests", post(submit))
        .route("/api/requests/{id}", get(request_status))
        .route("/api/workers/{worker}/assignments", get(assignments))
        .route("/api/workers/{worker}/tasks/{task}/question", get(question))
        .route("/api/workers/{worker}/tasks/{task}/answers", post(answer))
        .route("/api/workers/{worker}/rewards", get(rewards))
        .route("/api/admin/landmarks", post(admin_landmarks))
        .route("/api/admin/checkins", post(admin_checkins))
        .route("/api/admin/workers", post(admin_workers))
        .route("/api/admin/retrain", post(admin_retrain))
        .route("/api/admin/tick", post(admin_tick))
        .route("/api/admin/tasks/{id}", get(admin_task))
        .route("/api/admin/truths", get(admin_truths))
        .route("/api/admin/events", get(admin_events))
        .with_state(engine)
}

/// Serves until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
