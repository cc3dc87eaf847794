//! Drives the HTTP API in-process: create a session, submit two
//! instructions, poll until each run finishes and print the results.
//!
//! The same requests work against `apsc serve` with any HTTP client.

use std::sync::Arc;
use std::time::Duration;

use apsc_core::guidance::{guided_base, MockBackend, PlanConfig};
use apsc_core::scenario::RoadClass;
use apsc_service::api::{router, AppState};
use apsc_service::store::SessionStore;
use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<Value> {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    let value: Value = serde_json::from_slice(&bytes)?;
    anyhow::ensure!(status.is_success(), "{method} {uri}: {status} {value}");
    Ok(value)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut base = guided_base(RoadClass::Icy);
    base.max_time = 20.0;
    let state = AppState {
        store: Arc::new(SessionStore::open(dir.path())?),
        backend: Arc::new(MockBackend),
        base,
        plan: PlanConfig::default(),
    };
    let app = router(state);

    let id = call(&app, "POST", "/sessions", None).await?["id"].as_str().unwrap_or_default().to_owned();
    println!("session {id}");
    for instruction in ["Drive aggressively, the road is icy.", "Now be more careful."] {
        let accepted =
            call(&app, "POST", &format!("/sessions/{id}/runs"), Some(json!({ "instruction": instruction }))).await?;
        let run_id = accepted["run_id"].as_str().unwrap_or_default().to_owned();
        loop {
            let session = call(&app, "GET", &format!("/sessions/{id}"), None).await?;
            match session["status"].as_str() {
                Some("done") | Some("error") => break,
                _ => tokio::time::sleep(Duration::from_millis(200)).await,
            }
        }
        let results = call(&app, "GET", &format!("/sessions/{id}/runs/{run_id}"), None).await?;
        println!("> {instruction}");
        println!("  {}", results["rationale"].as_str().unwrap_or_default());
        println!("  executables {}", results["executables"]);
        println!(
            "  lateral {:.3} m, speed {:.2} m/s, safety {:.2}",
            results["digest"]["lateral_mean"].as_f64().unwrap_or(f64::NAN),
            results["digest"]["speed_mean"].as_f64().unwrap_or(f64::NAN),
            results["digest"]["safety"].as_f64().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
