use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use autotour::config::{Config, Mode, StoreKind};
use autotour::pipeline::{no_progress, Pipeline, Stage};
use autotour::presentation::serialize_result;
use autotour_service::{router, AppState};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> Config {
    Config {
        fixtures_root: fixtures(),
        ..Config::default()
    }
}

fn photo() -> Vec<u8> {
    std::fs::read(fixtures().join("choi_hung/photo.png")).unwrap()
}

fn scene_meta() -> Value {
    json!({"lat": 22.3364, "lon": 114.2655, "heading_deg": 0.0, "scene": "choi_hung"})
}

const BOUNDARY: &str = "XbOuNdArYx";

fn multipart(photo: &[u8], meta: &Value) -> Request<Body> {
    let mut body = Vec::new();
    body.extend_from_slice(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"meta\"\r\n\r\n").as_bytes());
    body.extend_from_slice(meta.to_string().as_bytes());
    body.extend_from_slice(
        format!("\r\n--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"photo\"; filename=\"p.png\"\r\nContent-Type: image/png\r\n\r\n")
            .as_bytes(),
    );
    body.extend_from_slice(photo);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/v1/jobs")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn submit(app: &Router, meta: &Value) -> String {
    let (s, b) = send(app, multipart(&photo(), meta)).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&b));
    let v: Value = serde_json::from_slice(&b).unwrap();
    v["job_id"].as_str().unwrap().to_string()
}

/// Polls status until terminal; returns the distinct states seen.
async fn wait(app: &Router, id: &str) -> (Vec<String>, Value) {
    let mut seen: Vec<String> = Vec::new();
    for _ in 0..2000 {
        let (s, v) = get_json(app, &format!("/v1/jobs/{id}/status")).await;
        assert_eq!(s, StatusCode::OK);
        let st = v["state"].as_str().unwrap().to_string();
        if seen.last() != Some(&st) {
            seen.push(st.clone());
        }
        if st == "done" || st == "failed" {
            return (seen, v);
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {id} did not finish");
}

fn is_prefix_order(seen: &[String]) -> bool {
    let order = ["queued", "running", "done", "failed"];
    let idx: Vec<usize> = seen.iter().map(|s| order.iter().position(|o| o == s).unwrap()).collect();
    idx.windows(2).all(|w| w[0] < w[1] && !(w[0] == 2 && w[1] == 3))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn lifecycle_and_stage_events() {
    let state = AppState::new(config()).unwrap();
    let app = router(state);
    let id = submit(&app, &scene_meta()).await;
    let (seen, status) = wait(&app, &id).await;
    assert_eq!(seen.last().unwrap(), "done");
    assert!(is_prefix_order(&seen), "{seen:?}");

    let events = status["progress"].as_array().unwrap();
    let finished: HashSet<&str> = events
        .iter()
        .filter(|e| e["phase"] == "finished")
        .map(|e| e["stage"].as_str().unwrap())
        .collect();
    for s in Stage::ALL {
        assert!(finished.contains(s.as_str()), "missing {s}");
    }
    let at: Vec<f64> = events.iter().map(|e| e["at_ms"].as_f64().unwrap()).collect();
    assert!(at.windows(2).all(|w| w[0] <= w[1]), "{at:?}");

    let (s, body) = send(&app, Request::get(format!("/v1/jobs/{id}/result")).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    let doc: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["annotations"].as_array().unwrap().len(), 3);

    // Same bytes as a direct pipeline run.
    let cfg = config();
    let cam = autotour_service::Meta {
        lat: 22.3364,
        lon: 114.2655,
        heading_deg: 0.0,
        fov_deg: None,
        scene: None,
    }
    .camera(&cfg)
    .unwrap();
    let direct = Pipeline::from_config(&cfg, "choi_hung").unwrap().run(&photo(), &cam, &no_progress).unwrap();
    assert_eq!(String::from_utf8(body).unwrap(), serialize_result(&direct));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn ten_concurrent_jobs() {
    let app = router(AppState::new(config()).unwrap());
    let subs = (0..10).map(|_| {
        let app = app.clone();
        tokio::spawn(async move { submit(&app, &scene_meta()).await })
    });
    let mut ids = Vec::new();
    for h in subs {
        ids.push(h.await.unwrap());
    }
    let distinct: HashSet<_> = ids.iter().collect();
    assert_eq!(distinct.len(), 10);
    for id in &ids {
        let (seen, _) = wait(&app, id).await;
        assert_eq!(seen.last().unwrap(), "done");
    }
}

#[tokio::test]
async fn queued_job_is_not_ready() {
    let state = AppState::new(config()).unwrap();
    let pool = state.workers();
    let n = state.config.service.worker_count();
    let held = pool.acquire_many_owned(n as u32).await.unwrap();
    let app = router(state);
    let id = submit(&app, &scene_meta()).await;
    let (_, v) = get_json(&app, &format!("/v1/jobs/{id}/status")).await;
    assert_eq!(v["state"], "queued");
    let (s, v) = get_json(&app, &format!("/v1/jobs/{id}/result")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error_code"], "NotReady");
    drop(held);
    let (seen, _) = wait(&app, &id).await;
    assert_eq!(seen.last().unwrap(), "done");
}

#[tokio::test]
async fn unknown_job() {
    let app = router(AppState::new(config()).unwrap());
    for path in ["status", "result"] {
        let (s, v) = get_json(&app, &format!("/v1/jobs/nope/{path}")).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        assert_eq!(v["error_code"], "JobNotFound");
    }
}

#[tokio::test]
async fn invalid_metadata() {
    let app = router(AppState::new(config()).unwrap());
    let mut bad = scene_meta();
    bad["heading_deg"] = json!(720.0);
    let (s, b) = send(&app, multipart(&photo(), &bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["error_code"], "InvalidMetadata");

    let (s, _) = send(&app, multipart(&[], &scene_meta())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let mut lat = scene_meta();
    lat["lat"] = json!(95.0);
    let (s, _) = send(&app, multipart(&photo(), &lat)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let mut scene = scene_meta();
    scene["scene"] = json!("../etc");
    let (s, _) = send(&app, multipart(&photo(), &scene)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn oversized_photo() {
    let app = router(AppState::new(config()).unwrap());
    let big = vec![0u8; 20 * 1024 * 1024];
    let (s, b) = send(&app, multipart(&big, &scene_meta())).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE, "{}", String::from_utf8_lossy(&b));
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["error_code"], "PayloadTooLarge");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_job_names_stage() {
    // Scenario with model responses but no stored map.
    let root = tempfile::tempdir().unwrap();
    let dst = root.path().join("nomap");
    std::fs::create_dir_all(dst.join("vlm/detect")).unwrap();
    std::fs::copy(fixtures().join("choi_hung/vlm/detect/default.txt"), dst.join("vlm/detect/default.txt")).unwrap();
    let mut cfg = config();
    cfg.fixtures_root = root.path().to_path_buf();
    let app = router(AppState::new(cfg).unwrap());
    let mut meta = scene_meta();
    meta["scene"] = json!("nomap");
    let id = submit(&app, &meta).await;
    let (seen, status) = wait(&app, &id).await;
    assert_eq!(seen.last().unwrap(), "failed");
    assert!(is_prefix_order(&seen));
    assert_eq!(status["error"]["stage"], "osm_ingest");
    let (s, v) = get_json(&app, &format!("/v1/jobs/{id}/result")).await;
    assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(v["error_code"], "JobFailed");
    assert_eq!(v["stage"], "osm_ingest");
}

#[tokio::test]
async fn health_is_cached() {
    let state = AppState::new(config()).unwrap();
    let app = router(state.clone());
    for _ in 0..3 {
        let (s, v) = get_json(&app, "/v1/health").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v, json!({"live": true, "overpass_ok": true, "provider_ok": true}));
    }
    assert_eq!(state.probe_count(), 1);
}

#[tokio::test]
async fn health_live_mode_unreachable() {
    let mut cfg = config();
    cfg.mode = Mode::Live;
    // Nothing listens on the discard port.
    cfg.overpass.endpoint = "http://127.0.0.1:9/api/interpreter".into();
    let app = router(AppState::new(cfg).unwrap());
    let (_, v) = get_json(&app, "/v1/health").await;
    assert_eq!(v["live"], true);
    assert_eq!(v["overpass_ok"], false);
}

#[tokio::test]
async fn dryrun_matches_pipeline() {
    let app = router(AppState::new(config()).unwrap());
    let detect = std::fs::read_to_string(fixtures().join("choi_hung/vlm/detect/default.txt")).unwrap();
    let features = autotour::photo::parse_detection_output(&detect).unwrap().features;
    let mut req = scene_meta();
    req["features"] = serde_json::to_value(&features).unwrap();
    let (s, b) = send(
        &app,
        Request::post("/v1/dryrun")
            .header("content-type", "application/json")
            .body(Body::from(req.to_string()))
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let v: Value = serde_json::from_slice(&b).unwrap();
    let matched: Vec<&str> = v["matches"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|m| m["matched"]["id"].as_str())
        .collect();
    let mut sorted = matched.clone();
    sorted.sort();
    assert_eq!(sorted, vec!["way/101", "way/103", "way/104"]);
    assert_eq!(v["sectors"].as_array().unwrap().len(), features.len());
    assert_eq!(v["footprints"].as_array().unwrap().len(), v["candidates"].as_array().unwrap().len());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn file_store_survives_restart_memory_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.service.store = StoreKind::File;
    cfg.service.store_dir = Some(dir.path().to_path_buf());
    let app = router(AppState::new(cfg.clone()).unwrap());
    let id = submit(&app, &scene_meta()).await;
    wait(&app, &id).await;
    let again = router(AppState::new(cfg).unwrap());
    let (s, v) = get_json(&again, &format!("/v1/jobs/{id}/result")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["schema_version"], 1);

    let mem = router(AppState::new(config()).unwrap());
    let id = submit(&mem, &scene_meta()).await;
    wait(&mem, &id).await;
    let restarted = router(AppState::new(config()).unwrap());
    let (s, _) = get_json(&restarted, &format!("/v1/jobs/{id}/status")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
