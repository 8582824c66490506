//! HTTP surface over [`Session`]s.
//!
//! | method | path                    | body            | reply            |
//! |--------|-------------------------|-----------------|------------------|
//! | POST   | `/sessions`             | `CreateRequest` | `SessionState`   |
//! | POST   | `/sessions/{id}/step`   | `StepRequest`   | `StepResult`     |
//! | GET    | `/sessions/{id}/state`  |                 | `SessionState`   |
//! | GET    | `/sessions/{id}/events` |                 | SSE, `step` events carrying `StepResult` |
//! | GET    | `/sessions/{id}/log`    |                 | JSONL step log   |
//! | GET    | `/healthz`              |                 | status           |
//!
//! Every JSON reply carries `schema_version`. Failed requests answer with
//! `{"schema_version", "error", "message", "fields": [{"field", "message"}]}`.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::{broadcast, Mutex};

use crate::session::{
    CreateRequest, FieldError, Session, SessionError, StepRequest, SCHEMA_VERSION,
};

/// Buffered step events per session; slow subscribers skip ahead.
const EVENT_BUFFER: usize = 64;

struct Handle {
    session: Mutex<Session>,
    events: broadcast::Sender<Arc<str>>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Handle>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    fn get(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_owned()).into())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/state", get(state_of))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/log", get(log))
        .with_state(state)
}

/// JSON body with floats at 17 significant digits.
fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match context_memory::json::to_vec(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    schema_version: u32,
    error: &'static str,
    message: String,
    fields: &'a [FieldError],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, fields) = match &self.0 {
            SessionError::Invalid(f) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "validation", f.as_slice())
            }
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "not-found", &[][..]),
            SessionError::Log { .. } => (StatusCode::BAD_REQUEST, "log", &[][..]),
            SessionError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", &[][..]),
        };
        json(
            status,
            &ErrorBody {
                schema_version: SCHEMA_VERSION,
                error: kind,
                message: self.0.to_string(),
                fields,
            },
        )
    }
}

/// Parses a JSON body, naming the offending field on failure. An empty
/// body reads as `{}`.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        body
    };
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".into() } else { path };
        ApiError(SessionError::field(field, e.into_inner().to_string()))
    })
}

async fn healthz(State(state): State<AppState>) -> Response {
    let n = state.sessions.read().expect("session map lock").len();
    json(
        StatusCode::OK,
        &serde_json::json!({"schema_version": SCHEMA_VERSION, "status": "ok", "sessions": n}),
    )
}

async fn create(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse(&body)?;
    let n = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let id = format!("s{n:06}");
    // World generation can take a moment; keep it off the reactor.
    let session = tokio::task::spawn_blocking(move || Session::create(id, req))
        .await
        .map_err(|e| SessionError::Internal(e.to_string()))??;
    let reply = session.state();
    tracing::info!(session = %reply.session_id, "created");
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    state.sessions.write().expect("session map lock").insert(
        reply.session_id.clone(),
        Arc::new(Handle {
            session: Mutex::new(session),
            events,
        }),
    );
    Ok(json(StatusCode::CREATED, &reply))
}

async fn step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: StepRequest = parse(&body)?;
    let handle = state.get(&id)?;
    // The lock serializes steps per session; reads wait for a step to finish
    // and so always see a whole number of steps.
    let mut session = handle.session.lock().await;
    let result = session.step(req)?;
    drop(session);
    tracing::debug!(session = %id, step = result.step, retrieved = result.retrieved.len(), "step");
    let body =
        context_memory::json::to_vec(&result).map_err(|e| SessionError::Internal(e.to_string()))?;
    let text: Arc<str> = String::from_utf8(body.clone())
        .expect("JSON is UTF-8")
        .into();
    // No subscribers is fine.
    let _ = handle.events.send(text);
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        body,
    )
        .into_response())
}

async fn state_of(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let handle = state.get(&id)?;
    let s = handle.session.lock().await.state();
    Ok(json(StatusCode::OK, &s))
}

async fn log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = state.get(&id)?;
    let text = handle.session.lock().await.log_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let rx = state.get(&id)?.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let event = match rx.recv().await {
            Ok(data) => Event::default().event("step").data(&*data),
            // Tell the subscriber how many steps it missed rather than
            // silently skipping them.
            Err(broadcast::error::RecvError::Lagged(n)) => {
                let note = serde_json::json!({"schema_version": SCHEMA_VERSION, "skipped": n});
                Event::default().event("lagged").data(note.to_string())
            }
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(event), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Serves until ctrl-c.
pub async fn serve(bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
