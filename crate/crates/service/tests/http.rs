use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use apsc_core::control::ControllerKind;
use apsc_core::guidance::{BackendError, ChatBackend, ChatRequest, MockBackend, PlanConfig};
use apsc_core::runlog::RunLog;
use apsc_core::scenario::Scenario;
use apsc_service::api::{results_payload, router, AppState, RunResults, MAX_SERIES_POINTS};
use apsc_service::store::{SessionRecord, SessionStore, Status};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

/// Wraps the mock, counting calls and optionally stalling each one.
struct Counting {
    calls: AtomicUsize,
    delay: Duration,
}

impl Counting {
    fn new(delay: Duration) -> Arc<Self> {
        Arc::new(Self { calls: AtomicUsize::new(0), delay })
    }
}

impl ChatBackend for Counting {
    fn id(&self) -> String {
        "counting-mock".into()
    }
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(self.delay);
        MockBackend.complete(request)
    }
}

fn tiny_base() -> Scenario {
    let mut s = Scenario { controller: ControllerKind::ApscFilter, max_time: 4.0, ..Scenario::default() };
    s.psc.mc_samples = 8;
    s.psc.horizon.steps = 5;
    s
}

fn app(root: &std::path::Path, backend: Arc<dyn ChatBackend>) -> Router {
    let store = Arc::new(SessionStore::open(root).unwrap());
    router(AppState { store, backend, base: tiny_base(), plan: PlanConfig::default() })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_owned()
}

async fn wait_settled(app: &Router, id: &str) -> SessionRecord {
    for _ in 0..600 {
        let (_, body) = call(app, "GET", &format!("/sessions/{id}"), None).await;
        let rec: SessionRecord = serde_json::from_value(body).unwrap();
        if rec.status.accepts_submissions() && rec.status != Status::Idle {
            return rec;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("session {id} never settled");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Arc::new(MockBackend));
    assert_eq!(call(&app, "GET", "/healthz", None).await.0, StatusCode::OK);

    let (status, body) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "unknown-session");

    let (status, _) = call(&app, "POST", "/sessions/nope/runs", Some(json!({ "instruction": "drive" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = create(&app).await;
    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/runs/run-999"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "unknown-run");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path(), Arc::new(MockBackend));
    let ids = [create(&first).await, create(&first).await];
    drop(first);

    let second = app(dir.path(), Arc::new(MockBackend));
    for id in &ids {
        let (status, body) = call(&second, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["id"], id.as_str());
        assert_eq!(body["status"], "idle");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn invalid_overrides_never_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Counting::new(Duration::ZERO);
    let app = app(dir.path(), backend.clone());
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/runs");

    for bad in [
        json!({ "instruction": "drive", "overrides": { "dt": -1.0 } }),
        json!({ "instruction": "drive", "overrides": { "no_such_field": 1 } }),
        json!({ "instruction": "drive", "overrides": [1, 2] }),
        json!({ "instruction": "drive", "mc_samples": 0 }),
        json!({ "instruction": "   " }),
    ] {
        let (status, body) = call(&app, "POST", &uri, Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert!(body["error"]["message"].is_string());
    }
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "instruction": "drive", "bogus": true }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    let rec: SessionRecord =
        serde_json::from_value(call(&app, "GET", &format!("/sessions/{id}"), None).await.1).unwrap();
    assert!(rec.runs.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_admit_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Counting::new(Duration::from_millis(300)));
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/runs");

    let submits = (0..6).map(|i| {
        let (app, uri) = (app.clone(), uri.clone());
        tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({ "instruction": "drive carefully", "seed": i }))).await
        })
    });
    let mut statuses = Vec::new();
    for h in submits {
        let (status, body) = h.await.unwrap();
        if status == StatusCode::CONFLICT {
            assert_eq!(body["error"]["code"], "session-busy");
        }
        statuses.push(status);
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::ACCEPTED).count(), 1, "{statuses:?}");
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 5, "{statuses:?}");

    let rec = wait_settled(&app, &id).await;
    assert_eq!(rec.runs.len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn guided_round_trip_matches_stored_log() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Arc::new(MockBackend));
    let id = create(&app).await;

    let (status, body) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/runs"),
        Some(json!({ "instruction": "Drive aggressively on ice.", "seed": 3 })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run_id = body["run_id"].as_str().unwrap().to_owned();
    assert_eq!(run_id, "run-001");

    let rec = wait_settled(&app, &id).await;
    assert_eq!(rec.status, Status::Done, "{:?}", rec.runs[0].error);
    assert_eq!(rec.state.turns(), 1);
    assert_eq!(rec.state.executables[0].e_max, 10.0);

    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/runs/{run_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let results: RunResults = serde_json::from_value(body).unwrap();

    let log = RunLog::load(&rec.runs[0].dir).unwrap();
    assert_eq!(results, results_payload(&id, &rec, &run_id, &log).unwrap());
    assert_eq!(results.metrics, log.meta.metrics);
    assert_eq!(results.e_max, 10.0);
    assert_eq!(results.e_max, log.scenario.safe_set.e_max);
    assert_eq!(results.true_mu, log.meta.true_mu);
    assert!(results.trajectory.len() <= MAX_SERIES_POINTS);
    let (first, last) = (&log.rows[0], log.rows.last().unwrap());
    assert_eq!((results.trajectory[0].step, results.trajectory.last().unwrap().step), (first.step, last.step));
    assert_eq!(results.posterior.last().unwrap().mean, last.belief_mean);
    assert_eq!(results.posterior.last().unwrap().std, last.belief_var.sqrt());
    for p in &results.trajectory {
        let row = &log.rows[p.step];
        assert_eq!((p.e, p.vx, p.psi), (row.e, row.vx, row.psi));
    }

    // A second turn sees the first run's digest and keeps the session history.
    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/runs"),
        Some(json!({ "instruction": "Now be more careful.", "seed": 3 })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let rec = wait_settled(&app, &id).await;
    assert_eq!(rec.status, Status::Done);
    assert_eq!(rec.state.turns(), 2);
    assert_eq!(rec.state.executables[1].e_max, 3.0);
    let events = SessionStore::open(dir.path()).unwrap().transcript(&id).unwrap();
    assert!(events.len() >= 7, "{events:?}");
}

#[test]
fn ten_thousand_ids_are_unique() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let ids: HashSet<String> = (0..10_000).map(|_| store.create("mock").unwrap().id).collect();
    assert_eq!(ids.len(), 10_000);
    assert_eq!(store.ids().len(), 10_000);
}
