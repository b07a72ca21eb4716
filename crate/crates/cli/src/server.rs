//! HTTP and WebSocket transport for live sessions.
//!
//! Session management is plain request/response; turns go over a WebSocket
//! per session. Message shapes are described in `docs/wire-protocol.md`.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use vislearn::live::{SessionStore, WireMessage};
use vislearn::Error;

pub type Shared = Arc<SessionStore>;

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub policy: String,
    #[serde(default)]
    pub world_seed: u64,
}

#[derive(Debug, Deserialize)]
pub struct TurnRequest {
    pub utterance: String,
}

/// What a client may send on the turn stream.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Tutor { utterance: String },
    Advance,
    End,
}

pub struct ApiError {
    session: String,
    error: Error,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.error {
            Error::UnknownSession(_) => StatusCode::NOT_FOUND,
            Error::SessionEnded(_) | Error::Precondition(_) => StatusCode::CONFLICT,
            Error::InvalidConfig(_) | Error::IllegalAct(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(WireMessage::error(&self.session, self.error.to_string()))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a store call off the async workers; session locks are blocking.
async fn blocking<T, F>(store: Shared, session: String, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> vislearn::Result<T> + Send + 'static,
{
    let sid = session.clone();
    match tokio::task::spawn_blocking(move || f(&store)).await {
        Ok(Ok(v)) => Ok(Json(v)),
        Ok(Err(error)) => Err(ApiError { session: sid, error }),
        Err(e) => Err(ApiError { session: sid, error: Error::Precondition(format!("worker failed: {e}")) }),
    }
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/turns", post(turn))
        .route("/sessions/{id}/end", post(end))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(store)
}

async fn create(State(store): State<Shared>, Json(req): Json<CreateRequest>) -> ApiResult<serde_json::Value> {
    blocking(store, String::new(), move |s| {
        let id = s.create(&req.policy, req.world_seed)?;
        Ok(serde_json::json!({ "session": id }))
    })
    .await
}

async fn state(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<vislearn::live::Readout> {
    blocking(store, id.clone(), move |s| s.state(&id)).await
}

async fn advance(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<Vec<WireMessage>> {
    blocking(store, id.clone(), move |s| s.advance(&id)).await
}

async fn turn(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<TurnRequest>,
) -> ApiResult<Vec<WireMessage>> {
    blocking(store, id.clone(), move |s| s.step(&id, &req.utterance)).await
}

async fn end(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<WireMessage> {
    blocking(store, id.clone(), move |s| s.end(&id)).await
}

async fn stream(ws: WebSocketUpgrade, State(store): State<Shared>, Path(id): Path<String>) -> Response {
    // Fail before upgrading when the session does not exist.
    let check = {
        let (store, id) = (store.clone(), id.clone());
        blocking(store, id.clone(), move |s| s.get(&id).map(|_| ())).await
    };
    if let Err(e) = check {
        return e.into_response();
    }
    ws.on_upgrade(move |socket| drive(socket, store, id))
}

/// Handles one client message at a time, so replies leave in the order
/// their requests arrived.
async fn drive(mut socket: WebSocket, store: Shared, id: String) {
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let replies = match serde_json::from_str::<ClientMessage>(&text) {
            Err(e) => vec![WireMessage::error(&id, format!("bad message: {e}"))],
            Ok(cmd) => {
                let sid = id.clone();
                let out = blocking(store.clone(), id.clone(), move |s| match cmd {
                    ClientMessage::Tutor { utterance } => s.step(&sid, &utterance),
                    ClientMessage::Advance => s.advance(&sid),
                    ClientMessage::End => s.end(&sid).map(|m| vec![m]),
                })
                .await;
                match out {
                    Ok(Json(v)) => v,
                    Err(e) => vec![WireMessage::error(&id, e.error.to_string())],
                }
            }
        };
        for m in replies {
            let json = serde_json::to_string(&m).expect("wire messages serialise");
            if socket.send(Message::Text(json.into())).await.is_err() {
                return;
            }
        }
    }
}

pub async fn run(addr: &str, store: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("vislearn: serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
