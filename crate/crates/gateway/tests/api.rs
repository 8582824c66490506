use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use ctxmem_gateway::api::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tower::ServiceExt;

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, String, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_owned())
        .unwrap_or_default();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, ctype, bytes)
}

async fn json_call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, ctype, bytes) = call(app, method, uri, body).await;
    assert_eq!(ctype, "application/json", "{uri}");
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn new_session(app: &Router) -> String {
    let (status, v) = json_call(app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_owned()
}

fn pose(x: f64, y: f64, yaw: f64) -> Value {
    json!({"pose": {"x": x, "y": y, "yaw": yaw}})
}

#[tokio::test]
async fn healthz_reports_ok() {
    let app = router(AppState::default());
    let (status, v) = json_call(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["sessions"], 0);
}

#[tokio::test]
async fn create_step_state_and_log() {
    let app = router(AppState::default());
    let (status, created) = json_call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["schema_version"], 1);
    assert_eq!(created["store"]["frames"], 1);
    let id = created["session_id"].as_str().unwrap();

    let (status, step) = json_call(
        &app,
        "POST",
        &format!("/sessions/{id}/step"),
        Some(pose(0.0, 0.0, 0.0)),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{step}");
    assert_eq!(step["step"], 1);
    assert_eq!(step["frame_id"], 1);
    assert_eq!(step["retrieved"][0]["id"], 0);
    assert_eq!(step["coverage"], 1.0);
    assert_eq!(
        step["config"]["retrieval"]["strategy"],
        "fov-non-adj-far-space-time"
    );

    let (status, st) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(st["step"], 1);
    assert_eq!(st["store"]["frames"], 2);
    assert_eq!(st["poses"].as_array().unwrap().len(), 2);

    let (status, ctype, body) = call(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "application/x-ndjson");
    let text = String::from_utf8(body).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["kind"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(kinds, ["create", "step"]);
    let rep = ctxmem_gateway::replay(&text).unwrap();
    assert!(rep.mismatches.is_empty());
}

#[tokio::test]
async fn create_accepts_configs_and_strategy_aliases() {
    let app = router(AppState::default());
    let body = json!({
        "world": {"density": 2.0, "occluder_count": 0, "bounds": {"min": {"x": -10.0, "y": -10.0}, "max": {"x": 10.0, "y": 10.0}}, "seed": 3},
        "start": {"x": 1.0, "y": 2.0, "yaw": 0.5},
        "retrieval": {"strategy": "fov-nonadj", "k": 8},
        "overlap": {"d_max": 12.0}
    });
    let (status, v) = json_call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["config"]["retrieval"]["strategy"], "fov-non-adj");
    assert_eq!(v["config"]["retrieval"]["k"], 8);
    assert_eq!(v["config"]["overlap"]["d_max"], 12.0);
    assert_eq!(v["world"]["seed"], 3);
    assert_eq!(v["pose"]["x"], 1.0);
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let app = router(AppState::default());
    let id = new_session(&app).await;
    let uri = format!("/sessions/{id}/step");
    let cases = [
        (json!({"pose": {"x": "a", "y": 0, "yaw": 0}}), "pose.x"),
        (
            json!({"pose": {"x": 0, "y": 0, "yaw": 0, "fov": 0.0}}),
            "pose.fov",
        ),
        (
            json!({"pose": {"x": 0, "y": 0, "yaw": 0, "roll": 1}}),
            "pose.roll",
        ),
        (json!({}), "pose"),
        (
            json!({"delta": {"forward": 1}, "retrieval": {"k": 0}}),
            "retrieval.k",
        ),
        (
            json!({"delta": {"forward": 1}, "retrieval": {"strategy": "psychic"}}),
            "retrieval.strategy",
        ),
    ];
    for (body, field) in cases {
        let (status, v) = json_call(&app, "POST", &uri, Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body} -> {v}");
        assert_eq!(v["error"], "validation");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["fields"][0]["field"], field, "{body} -> {v}");
        assert!(!v["message"].as_str().unwrap().is_empty());
    }
    let (status, v) = json_call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"start": {"x": 0, "y": 0, "yaw": 0, "fov": -1}})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], "start.fov");

    let (status, _, body) = call(&app, "POST", &uri, None).await;
    assert_eq!(
        status,
        StatusCode::UNPROCESSABLE_ENTITY,
        "{}",
        String::from_utf8_lossy(&body)
    );

    // Nothing was appended.
    let (_, st) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(st["store"]["frames"], 1);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = router(AppState::default());
    for (method, uri, body) in [
        ("GET", "/sessions/nope/state", None),
        ("GET", "/sessions/nope/log", None),
        ("GET", "/sessions/nope/events", None),
        ("POST", "/sessions/nope/step", Some(pose(0.0, 0.0, 0.0))),
    ] {
        let (status, v) = json_call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"], "not-found");
    }
}

#[tokio::test]
async fn sessions_do_not_share_state() {
    let app = router(AppState::default());
    let a = new_session(&app).await;
    let b = new_session(&app).await;
    assert_ne!(a, b);
    for i in 0..3 {
        let (s, _) = json_call(
            &app,
            "POST",
            &format!("/sessions/{a}/step"),
            Some(pose(i as f64, 0.0, 0.0)),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, sa) = json_call(&app, "GET", &format!("/sessions/{a}/state"), None).await;
    let (_, sb) = json_call(&app, "GET", &format!("/sessions/{b}/state"), None).await;
    assert_eq!(sa["store"]["frames"], 4);
    assert_eq!(sb["store"]["frames"], 1);
    let (_, h) = json_call(&app, "GET", "/healthz", None).await;
    assert_eq!(h["sessions"], 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_steps_are_serialized() {
    let app = router(AppState::default());
    let id = new_session(&app).await;
    let handles: Vec<_> = (0..12)
        .map(|i| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/step");
            tokio::spawn(async move {
                json_call(&app, "POST", &uri, Some(pose(i as f64, 1.0, 0.0))).await
            })
        })
        .collect();
    let mut steps = Vec::new();
    for h in handles {
        let (status, v) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["frame_id"], v["step"]);
        steps.push(v["step"].as_u64().unwrap());
    }
    steps.sort_unstable();
    assert_eq!(steps, (1..=12).collect::<Vec<_>>());
    let (_, ctype, log) = call(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(ctype, "application/x-ndjson");
    let rep = ctxmem_gateway::replay(std::str::from_utf8(&log).unwrap()).unwrap();
    assert!(rep.mismatches.is_empty());
    assert_eq!(rep.results.len(), 12);
}

async fn raw_request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: test\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn events_stream_each_step() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(AppState::default()))
            .await
            .unwrap()
    });

    let created = raw_request(addr, "POST", "/sessions", "{}").await;
    assert!(created.starts_with("HTTP/1.1 201"), "{created}");
    let body = created.split("\r\n\r\n").nth(1).unwrap();
    let id = serde_json::from_str::<Value>(body).unwrap()["session_id"]
        .as_str()
        .unwrap()
        .to_owned();

    let mut sub = TcpStream::connect(addr).await.unwrap();
    sub.write_all(
        format!(
            "GET /sessions/{id}/events HTTP/1.1\r\nHost: test\r\nAccept: text/event-stream\r\n\r\n"
        )
        .as_bytes(),
    )
    .await
    .unwrap();
    let mut sub = BufReader::new(sub);
    let mut head = String::new();
    loop {
        let mut line = String::new();
        sub.read_line(&mut line).await.unwrap();
        if line == "\r\n" {
            break;
        }
        head.push_str(&line);
    }
    assert!(head.starts_with("HTTP/1.1 200"), "{head}");
    assert!(
        head.to_ascii_lowercase()
            .contains("content-type: text/event-stream"),
        "{head}"
    );

    for (i, yaw) in [0.0, 0.5].into_iter().enumerate() {
        let step = pose(1.0, 0.0, yaw).to_string();
        let resp = raw_request(addr, "POST", &format!("/sessions/{id}/step"), &step).await;
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");

        // Chunked transfer: skip size lines and keep-alive comments until
        // a `step` event and its data arrive.
        let mut event = None;
        let data = tokio::time::timeout(Duration::from_secs(10), async {
            loop {
                let mut line = String::new();
                assert!(sub.read_line(&mut line).await.unwrap() > 0, "stream closed");
                let line = line.trim_end();
                if let Some(e) = line.strip_prefix("event: ") {
                    event = Some(e.to_owned());
                } else if let Some(d) = line.strip_prefix("data: ") {
                    return d.to_owned();
                }
            }
        })
        .await
        .expect("event within 10 s");
        assert_eq!(event.as_deref(), Some("step"));
        let v: Value = serde_json::from_str(&data).unwrap();
        assert_eq!(v["step"], i as u64 + 1);
        assert_eq!(v["session_id"], id.as_str());
        assert_eq!(v["schema_version"], 1);
    }
}
