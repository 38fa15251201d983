//! Operator HTTP API: `GET /state`, `GET /events` (server-sent log
//! records) and `POST /command`.

use std::convert::Infallible;
use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use acta_core::harness::{spawn_paced, CommandAck, Engine, OpsCommand, OpsHandle, SessionLog, Snapshot};
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Serialize;

use crate::CliError;

type Shared = Arc<OpsHandle>;

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

async fn state(State(h): State<Shared>) -> Json<Snapshot> {
    Json(h.snapshot())
}

async fn command(State(h): State<Shared>, body: Result<Json<OpsCommand>, JsonRejection>) -> Response {
    let cmd = match body {
        Ok(Json(c)) => c,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(ErrorBody { error: e.body_text() })).into_response(),
    };
    let ack: CommandAck = match tokio::task::spawn_blocking(move || h.command(cmd)).await {
        Ok(a) => a,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, Json(ErrorBody { error: e.to_string() })).into_response(),
    };
    let status = if ack.applied { StatusCode::OK } else { StatusCode::CONFLICT };
    (status, Json(ack)).into_response()
}

/// Each record is sent as an event named after its tag, with the raw line
/// as data. The stream ends when the run does.
async fn events(State(h): State<Shared>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let lines = h.subscribe();
    let (tx, rx) = tokio::sync::mpsc::unbounded_channel::<String>();
    std::thread::spawn(move || {
        for l in lines {
            if tx.send(l).is_err() {
                break;
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let line = rx.recv().await?;
        let tag = line.split('\t').next().unwrap_or("record").to_string();
        Some((Ok(Event::default().event(tag).data(line)), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

pub(crate) fn router(h: Shared) -> Router {
    Router::new().route("/state", get(state)).route("/events", get(events)).route("/command", post(command)).with_state(h)
}

async fn finished(h: Shared) {
    while !h.snapshot().finished {
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
}

/// Serves a paced run until interrupted, or until it finishes when
/// `exit_on_finish` is set. Returns the log of a completed run.
pub(crate) fn serve(engine: Engine, host: &str, port: u16, pace: f64, exit_on_finish: bool) -> Result<Option<SessionLog>, CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let handle: Shared = Arc::new(spawn_paced(engine, pace));
    let served = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(|e| CliError::Runtime(format!("bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        let app = axum::serve(listener, router(handle.clone()));
        tokio::select! {
            r = app => r.map_err(|e| CliError::Runtime(e.to_string())),
            _ = tokio::signal::ctrl_c() => Ok(()),
            _ = finished(handle.clone()), if exit_on_finish => Ok(()),
        }
    });
    // Dropping the runtime ends open connections and releases their handles.
    rt.shutdown_timeout(Duration::from_secs(1));
    served?;
    let handle = Arc::try_unwrap(handle).map_err(|_| CliError::Runtime("the engine is still in use".into()))?;
    let done = handle.snapshot().finished;
    let out = handle.stop()?;
    Ok(done.then_some(out.log))
}
