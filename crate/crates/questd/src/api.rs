//! HTTP API and the `/live` feed. Request handlers never touch the store;
//! writes go through the consumer channel and reads come from the latest
//! published snapshot.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use crossbeam_channel::Sender;
use questd_core::catalog::catalog_json;
use questd_core::events::DevEvent;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{broadcast, oneshot};
use tower_http::services::ServeDir;

use crate::daemon::{Command, Rejected, Shared};

const PLACEHOLDER: &str = include_str!("placeholder.html");

#[derive(Clone)]
struct App {
    shared: Arc<Shared>,
    commands: Sender<Command>,
}

pub fn router(shared: Arc<Shared>, commands: Sender<Command>, static_dir: Option<PathBuf>) -> Router {
    let app = App { shared, commands };
    let api = Router::new()
        .route("/achievements", get(achievements))
        .route("/state", get(state))
        .route("/events", post(post_event))
        .route("/reset", post(post_reset))
        .route("/live", get(live))
        .with_state(app);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    json_body(status, json!({"error": message.to_string()}).to_string())
}

async fn achievements() -> Response {
    json_body(StatusCode::OK, catalog_json())
}

async fn state(State(app): State<App>) -> Response {
    json_body(StatusCode::OK, app.shared.state_json().to_string())
}

async fn post_event(State(app): State<App>, body: Bytes) -> Response {
    let event: DevEvent = match serde_json::from_slice(&body) {
        Ok(e) => e,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid event: {e}")),
    };
    if let Err(e) = event.validate() {
        return error(StatusCode::BAD_REQUEST, format!("invalid event: {e}"));
    }
    let (tx, rx) = oneshot::channel();
    if app.commands.send(Command::Event { event, reply: Some(tx) }).is_err() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "engine stopped");
    }
    match rx.await {
        Ok(Ok(notifications)) => json_body(StatusCode::OK, json!({"notifications": notifications}).to_string()),
        Ok(Err(Rejected::Invalid(m))) => error(StatusCode::BAD_REQUEST, m),
        Ok(Err(Rejected::OutOfOrder(m))) => error(StatusCode::CONFLICT, m),
        Ok(Err(Rejected::Failed(m))) => error(StatusCode::INTERNAL_SERVER_ERROR, m),
        Err(_) => error(StatusCode::SERVICE_UNAVAILABLE, "engine stopped"),
    }
}

#[derive(Deserialize, Default)]
struct ResetRequest {
    #[serde(default)]
    confirm: bool,
}

async fn post_reset(State(app): State<App>, body: Bytes) -> Response {
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        ResetRequest::default()
    } else {
        match serde_json::from_slice::<ResetRequest>(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, e),
        }
    };
    if !req.confirm {
        return error(StatusCode::BAD_REQUEST, "reset needs explicit confirmation: send {\"confirm\": true}");
    }
    let (tx, rx) = oneshot::channel();
    if app.commands.send(Command::Reset { reply: tx }).is_err() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "engine stopped");
    }
    match rx.await {
        Ok(Ok(())) => json_body(StatusCode::OK, app.shared.state_json().to_string()),
        Ok(Err(m)) => error(StatusCode::INTERNAL_SERVER_ERROR, m),
        Err(_) => error(StatusCode::SERVICE_UNAVAILABLE, "engine stopped"),
    }
}

async fn live(ws: WebSocketUpgrade, State(app): State<App>) -> Response {
    ws.on_upgrade(move |socket| feed(socket, app))
}

/// Subscribes first, then greets, so nothing published after the greeting
/// can be missed.
async fn feed(mut socket: WebSocket, app: App) {
    let mut rx = app.shared.subscribe();
    let hello = json!({"type": "hello", "digest": app.shared.digest()}).to_string();
    if socket.send(Message::Text(hello.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let reason = format!("fell behind by {n} messages; resync with GET /state");
                    let frame = CloseFrame { code: 1008, reason: reason.into() };
                    let _ = socket.send(Message::Close(Some(frame))).await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
