//! HTTP routes. Simulation work runs on the blocking pool; handlers only
//! touch the store.

use std::sync::Arc;

use apsc_core::control::{run_episode, ControllerKind};
use apsc_core::guidance::{digest_run, llm_plan, ChatBackend, GuidanceExecutables, PlanConfig, RunDigest};
use apsc_core::runlog::{RunLog, RunMetrics};
use apsc_core::scenario::Scenario;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::{SessionRecord, SessionStore, Status, StoreError};

/// Points kept in a results payload series.
pub const MAX_SERIES_POINTS: usize = 200;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub backend: Arc<dyn ChatBackend>,
    /// Scenario every run starts from before overrides and executables.
    pub base: Scenario,
    pub plan: PlanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub instruction: String,
    /// Partial scenario, merged over the service's base scenario.
    #[serde(default)]
    pub overrides: Option<Value>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub controller: Option<ControllerKind>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown-session"),
            StoreError::UnknownRun(_) => (StatusCode::NOT_FOUND, "unknown-run"),
            StoreError::Busy(_) => (StatusCode::CONFLICT, "session-busy"),
            StoreError::Io { .. } | StoreError::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": ErrorBody { code: self.code.into(), message: self.message } })))
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/runs", post(submit_run))
        .route("/sessions/:id/runs/:rid", get(get_results))
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(State(app): State<AppState>) -> ApiResult<(StatusCode, Json<SessionRecord>)> {
    let store = app.store.clone();
    let provider = app.backend.id();
    let rec = tokio::task::spawn_blocking(move || store.create(&provider))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionRecord>> {
    Ok(Json(app.store.get(&id)?))
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// The scenario a request runs on, before the planned executables are applied.
pub fn request_scenario(base: &Scenario, req: &RunRequest) -> Result<Scenario, String> {
    let mut value = serde_json::to_value(base).expect("scenario serializes");
    if let Some(patch) = &req.overrides {
        if !patch.is_object() {
            return Err("overrides must be a JSON object".into());
        }
        merge(&mut value, patch);
    }
    if let Some(n) = req.mc_samples {
        value["psc"]["mc_samples"] = n.into();
    }
    if let Some(k) = req.controller {
        value["controller"] = serde_json::to_value(k).expect("controller serializes");
    }
    Scenario::from_json_str(&value.to_string()).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Submitted {
    pub session_id: String,
    pub run_id: String,
    pub status: Status,
}

async fn submit_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Submitted>)> {
    app.store.get(&id)?;
    let req: RunRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-request", e.to_string()))?;
    if req.instruction.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid-request",
            "instruction must not be empty",
        ));
    }
    let scenario = request_scenario(&app.base, &req)
        .map_err(|m| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-override", m))?;
    let seed = req.seed.unwrap_or(0);
    let entry = app.store.begin_run(&id, &req.instruction, seed)?;
    let run_id = entry.run_id.clone();
    let worker_id = id.clone();
    tokio::task::spawn_blocking(move || execute(&app, &worker_id, &entry.run_id, &req.instruction, &scenario, seed));
    Ok((StatusCode::ACCEPTED, Json(Submitted { session_id: id, run_id, status: Status::Planning })))
}

/// Plans, runs and records one turn; failures end up on the run entry.
fn execute(app: &AppState, id: &str, run_id: &str, instruction: &str, scenario: &Scenario, seed: u64) {
    let outcome = (|| -> Result<(), String> {
        let state = app.store.get(id).map_err(|e| e.to_string())?.state;
        let plan = llm_plan(&state, instruction, app.backend.as_ref(), &app.plan).map_err(|e| e.to_string())?;
        app.store.mark_running(id, run_id, &plan).map_err(|e| e.to_string())?;
        let log = run_episode(&plan.executables.apply(scenario), seed).map_err(|e| e.to_string())?;
        let digest = digest_run(&log).map_err(|e| e.to_string())?;
        app.store.finish(id, run_id, instruction, &plan, &log, &digest).map_err(|e| e.to_string())
    })();
    if let Err(message) = outcome {
        tracing::warn!(session = id, run = run_id, %message, "run failed");
        if let Err(e) = app.store.fail(id, run_id, &message) {
            tracing::error!(session = id, run = run_id, error = %e, "could not record failure");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub step: usize,
    pub t: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub session_id: String,
    pub run_id: String,
    pub instruction: String,
    pub rationale: String,
    pub executables: GuidanceExecutables,
    pub metrics: RunMetrics,
    pub digest: RunDigest,
    pub e_max: f64,
    pub true_mu: f64,
    pub trajectory: Vec<TrajectorySample>,
    pub posterior: Vec<PosteriorSample>,
}

/// Indices of an evenly strided subset of `0..n` that always contains the
/// first and last index and the arg-max and arg-min of `key`.
pub fn downsample_indices(n: usize, max_points: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    if n <= max_points.max(4) {
        return (0..n).collect();
    }
    let by_key = |a: &usize, b: &usize| key(*a).total_cmp(&key(*b));
    let hi = (0..n).max_by(by_key).expect("n > 0");
    let lo = (0..n).min_by(by_key).expect("n > 0");
    let budget = max_points.saturating_sub(4).max(1);
    let stride = (n - 1).div_ceil(budget).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).chain([n - 1, hi, lo]).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

pub fn results_payload(id: &str, rec: &SessionRecord, run_id: &str, log: &RunLog) -> Result<RunResults, ApiError> {
    let run = rec.run(run_id).ok_or_else(|| StoreError::UnknownRun(run_id.into()))?;
    let executables = run.executables.clone().ok_or_else(|| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", "finished run has no executables")
    })?;
    let digest =
        digest_run(log).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
    let rows = &log.rows;
    let idx = downsample_indices(rows.len(), MAX_SERIES_POINTS, |i| rows[i].e.abs());
    let trajectory = idx
        .iter()
        .map(|&i| {
            let r = &rows[i];
            let (x, y) = log.scenario.road.to_world(r.s, r.e);
            TrajectorySample { step: r.step, t: r.t, s: r.s, e: r.e, x, y, vx: r.vx, psi: r.psi }
        })
        .collect();
    let posterior = idx
        .iter()
        .map(|&i| PosteriorSample {
            step: rows[i].step,
            t: rows[i].t,
            mean: rows[i].belief_mean,
            std: rows[i].belief_var.sqrt(),
        })
        .collect();
    Ok(RunResults {
        session_id: id.into(),
        run_id: run_id.into(),
        instruction: run.instruction.clone(),
        rationale: run.rationale.clone().unwrap_or_default(),
        executables,
        metrics: log.meta.metrics.clone(),
        digest,
        e_max: log.scenario.safe_set.e_max,
        true_mu: log.meta.true_mu,
        trajectory,
        posterior,
    })
}

async fn get_results(
    State(app): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
) -> ApiResult<Json<RunResults>> {
    let rec = app.store.get(&id)?;
    let run = rec.run(&rid).ok_or_else(|| StoreError::UnknownRun(rid.clone()))?;
    match run.status {
        Status::Done => {}
        Status::Error => {
            let message = run.error.clone().unwrap_or_default();
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "run-failed", message));
        }
        other => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "run-not-done",
                format!("run is {other:?}").to_lowercase(),
            ));
        }
    }
    let dir = run.dir.clone();
    let log = tokio::task::spawn_blocking(move || RunLog::load(&dir))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
    Ok(Json(results_payload(&id, &rec, &rid, &log)?))
}
