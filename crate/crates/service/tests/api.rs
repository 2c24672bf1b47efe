mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use http_body_util::BodyExt;
use routecrowd_service::api::router;
use routecrowd_service::store::MemoryStore;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, headers: &[(&str, &str)], body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn submit_body() -> Value {
    json!({
        "source": {"lat": ORIGIN.lat, "lon": ORIGIN.lon},
        "destination": {"lat": ORIGIN.lat, "lon": ORIGIN.lon + 0.02},
        "departure": "2024-04-01T08:00:00Z",
        "deadline_hours": 2.0,
        "requester": "alice",
        "candidates": [
            {"source": "mpr", "landmarks": ["a", "b", "e"]},
            {"source": "ldr", "landmarks": ["a", "d", "e"]},
            {"source": "mfp", "landmarks": ["a", "c", "e"]}
        ]
    })
}

fn app(k: usize) -> Router {
    let (engine, _) = engine(k, 5);
    router(Arc::new(engine))
}

#[tokio::test]
async fn full_worker_session() {
    let app = app(1);
    let (status, rec) = call(&app, "POST", "/api/requests", &[], Some(submit_body())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec["status"]["status"], "pending");
    let task = rec["status"]["task"].as_str().unwrap().to_string();
    let req_id = rec["id"].as_str().unwrap().to_string();

    let (_, t) = call(&app, "GET", &format!("/api/admin/tasks/{task}"), &[], None).await;
    let worker = t["assignments"][0]["worker"].as_str().unwrap().to_string();
    // The serialized tree uses tagged nodes.
    assert_eq!(t["tree"]["root"]["kind"], "question");

    let (status, list) = call(&app, "GET", &format!("/api/workers/{worker}/assignments"), &[], None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list[0]["task"], task.as_str());

    // Answer "no" until the worker reaches a leaf; the truth is route a-c-e.
    let mut shown = Vec::new();
    loop {
        let (status, q) = call(&app, "GET", &format!("/api/workers/{worker}/tasks/{task}/question"), &[], None).await;
        if status == StatusCode::CONFLICT {
            break;
        }
        assert_eq!(status, StatusCode::OK);
        if q["next"]["kind"] == "resolved" {
            break;
        }
        let lm = q["next"]["landmark"].as_str().unwrap().to_string();
        assert_eq!(q["landmark"]["id"], lm.as_str());
        assert!(q["landmark"]["location"]["lat"].is_number());
        assert!(q.get("candidates").is_none());
        shown.push(lm.clone());
        let body = json!({"landmark": lm, "yes": lm == "c"});
        let (status, first) = call(&app, "POST", &format!("/api/workers/{worker}/tasks/{task}/answers"), &[], Some(body.clone())).await;
        assert_eq!(status, StatusCode::OK);
        let (_, second) = call(&app, "POST", &format!("/api/workers/{worker}/tasks/{task}/answers"), &[], Some(body)).await;
        if first["state"] != "resolved" {
            assert_eq!(first, second);
        }
    }
    assert!(!shown.is_empty() && shown.len() <= 2);

    let (_, rec) = call(&app, "GET", &format!("/api/requests/{req_id}"), &[], None).await;
    assert_eq!(rec["status"]["status"], "resolved");
    assert_eq!(rec["status"]["method"], "crowd");
    assert_eq!(rec["status"]["route"], json!(["a", "c", "e"]));

    let (_, r) = call(&app, "GET", &format!("/api/workers/{worker}/rewards"), &[], None).await;
    assert_eq!(r["points"], 1 + shown.len() as u64 + 2);

    let (status, err) = call(&app, "POST", &format!("/api/workers/{worker}/tasks/{task}/answers"), &[], Some(json!({"landmark": "b", "yes": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "task_closed");

    let (_, truths) = call(&app, "GET", "/api/admin/truths", &[], None).await;
    assert_eq!(truths.as_array().unwrap().len(), 1);
    let (_, events) = call(&app, "GET", "/api/admin/events?from=0", &[], None).await;
    assert!(events.as_array().unwrap().iter().any(|e| e["event"] == "task_resolved"));
}

#[tokio::test]
async fn error_statuses() {
    let app = app(2);
    let (status, _) = call(&app, "GET", "/api/requests/req-999999", &[], None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, rec) = call(&app, "POST", "/api/requests", &[], Some(submit_body())).await;
    let task = rec["status"]["task"].as_str().unwrap().to_string();
    let (status, err) = call(&app, "GET", &format!("/api/workers/nobody/tasks/{task}/question"), &[], None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(err["error"], "not_assigned");

    let (_, t) = call(&app, "GET", &format!("/api/admin/tasks/{task}"), &[], None).await;
    let worker = t["assignments"][0]["worker"].as_str().unwrap().to_string();
    let (status, err) = call(&app, "POST", &format!("/api/workers/{worker}/tasks/{task}/answers"), &[], Some(json!({"landmark": "zzz", "yes": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "wrong_question");

    let mut bad = submit_body();
    bad["deadline_hours"] = json!(-1.0);
    let (status, _) = call(&app, "POST", "/api/requests", &[], Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut both = submit_body();
    both["raw_candidates"] = json!([{"points": [{"lat": 1.0, "lon": 1.0}, {"lat": 1.1, "lon": 1.1}]}]);
    let (status, _) = call(&app, "POST", "/api/requests", &[], Some(both)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn raw_candidates_are_snapped() {
    let app = app(1);
    let p = |east: f64| {
        let g = ORIGIN.offset_km(0.02, east);
        json!({"lat": g.lat, "lon": g.lon})
    };
    let mut body = submit_body();
    body.as_object_mut().unwrap().remove("candidates");
    // a-b-c versus a-d-e along the landmark line.
    body["raw_candidates"] = json!([
        {"source": "x", "points": [p(0.0), p(0.4), p(0.8)]},
        {"source": "y", "points": [p(0.0), p(1.2), p(1.6)]}
    ]);
    let (status, rec) = call(&app, "POST", "/api/requests", &[], Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{rec}");
    let task = rec["status"]["task"].as_str().unwrap().to_string();
    let (_, t) = call(&app, "GET", &format!("/api/admin/tasks/{task}"), &[], None).await;
    assert_eq!(t["candidates"]["routes"][0]["route"], json!(["a", "b", "c"]));
    assert_eq!(t["candidates"]["routes"][1]["route"], json!(["a", "d", "e"]));
}

#[tokio::test]
async fn tokens_guard_endpoints() {
    let mut cfg = config(1);
    cfg.server.admin_token = Some("root".into());
    cfg.server.worker_tokens.insert("w0".into(), "secret0".into());
    let (engine, _) = engine_with(cfg, Arc::new(MemoryStore::new()), 3);
    let app = router(Arc::new(engine));

    let (status, _) = call(&app, "GET", "/api/admin/truths", &[], None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&app, "GET", "/api/admin/truths", &[("x-admin-token", "root")], None).await;
    assert_eq!(status, StatusCode::OK);

    let (status, _) = call(&app, "GET", "/api/workers/w0/rewards", &[], None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&app, "GET", "/api/workers/w0/rewards", &[("x-worker-token", "wrong")], None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, r) = call(&app, "GET", "/api/workers/w0/rewards", &[("x-worker-token", "secret0")], None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["points"], 0);
    // A worker without a configured token cannot get in at all.
    let (status, _) = call(&app, "GET", "/api/workers/w1/rewards", &[("x-worker-token", "secret0")], None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn admin_ingestion_and_retrain() {
    let clock = routecrowd_service::ManualClock::new(start());
    let engine = routecrowd_service::Engine::in_memory(config(1), Arc::new(clock)).unwrap();
    let app = router(Arc::new(engine));
    let (status, _) = call(&app, "POST", "/api/admin/retrain", &[], None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, n) = call(&app, "POST", "/api/admin/landmarks", &[], Some(serde_json::to_value(landmarks()).unwrap())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(n["landmarks"], 5);
    let (_, n) = call(&app, "POST", "/api/admin/workers", &[], Some(serde_json::to_value(workers(3)).unwrap())).await;
    assert_eq!(n["workers"], 3);
    let checkins = json!([
        {"traveller": "t1", "landmark": "a", "timestamp": 0},
        {"traveller": "t1", "landmark": "b", "timestamp": 1},
        {"traveller": "t2", "landmark": "a", "timestamp": 2}
    ]);
    let (status, scores) = call(&app, "POST", "/api/admin/checkins", &[], Some(checkins)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scores["a"], 1.0);
    let (status, report) = call(&app, "POST", "/api/admin/retrain", &[], None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(report["iterations"].as_u64().unwrap() > 0);
    let (status, tick) = call(&app, "POST", "/api/admin/tick", &[], None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tick["expired"], json!([]));
}
