//! HTTP+JSON routes over a [`Session`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use colonytree::edit::EditCommand;
use colonytree::features::TableKind;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::session::{Session, SessionError};

pub const REVISION_HEADER: &str = "x-revision";
const DEFAULT_WAIT_MS: u64 = 25_000;
const MAX_WAIT_MS: u64 = 60_000;

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/graph", get(graph))
        .route("/features/vertices", get(vertex_features))
        .route("/features/edges", get(edge_features))
        .route("/hints/cycle", get(cycle_hint))
        .route("/hints/indegree", get(indegree_hint))
        .route("/proofread/next", get(proofread_next))
        .route("/edit", post(edit))
        .route("/undo", post(undo))
        .route("/selection", post(selection))
        .route("/events", get(events))
        .with_state(session)
}

/// Serves until the process is stopped.
pub async fn serve(session: Arc<Session>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(session, tokio::net::TcpListener::bind(addr).await?).await
}

pub async fn serve_on(session: Arc<Session>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(session)).await
}

fn with_revision(revision: u64, response: impl IntoResponse) -> Response {
    let mut response = response.into_response();
    response
        .headers_mut()
        .insert(REVISION_HEADER, HeaderValue::from(revision));
    response
}

fn error(status: StatusCode, message: impl Into<String>, revision: u64) -> Response {
    with_revision(
        revision,
        (status, Json(json!({ "error": message.into(), "revision": revision }))),
    )
}

fn session_error(e: SessionError, revision: u64) -> Response {
    let status = match &e {
        SessionError::Conflict { .. } => StatusCode::CONFLICT,
        SessionError::Rejected(_) | SessionError::NoSharedFolder => StatusCode::BAD_REQUEST,
        SessionError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    let revision = match e {
        SessionError::Conflict { current, .. } => current,
        _ => revision,
    };
    error(status, e.to_string(), revision)
}

async fn graph(State(s): State<Arc<Session>>) -> Response {
    let snap = s.snapshot();
    with_revision(snap.revision, Json(&snap.graph))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Deserialize)]
struct FormatQuery {
    #[serde(default)]
    format: Format,
}

fn features(s: &Session, kind: TableKind, format: Format) -> Response {
    let snap = s.snapshot();
    let table = snap.table(kind);
    match format {
        Format::Csv => with_revision(
            snap.revision,
            ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], table.to_csv_string()),
        ),
        Format::Json => with_revision(snap.revision, Json(json!({ "revision": snap.revision, "table": table }))),
    }
}

async fn vertex_features(State(s): State<Arc<Session>>, Query(q): Query<FormatQuery>) -> Response {
    features(&s, TableKind::Vertex, q.format)
}

async fn edge_features(State(s): State<Arc<Session>>, Query(q): Query<FormatQuery>) -> Response {
    features(&s, TableKind::Edge, q.format)
}

async fn cycle_hint(State(s): State<Arc<Session>>) -> Response {
    let snap = s.snapshot();
    with_revision(snap.revision, Json(json!({ "revision": snap.revision, "cycle": snap.cycle })))
}

async fn indegree_hint(State(s): State<Arc<Session>>) -> Response {
    let snap = s.snapshot();
    with_revision(
        snap.revision,
        Json(json!({ "revision": snap.revision, "vertices": snap.indegree })),
    )
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    from: Option<u32>,
}

async fn proofread_next(State(s): State<Arc<Session>>, Query(q): Query<NextQuery>) -> Response {
    let snap = s.snapshot();
    let view = snap.proofread_next(q.from);
    with_revision(snap.revision, Json(json!({ "revision": snap.revision, "next": view })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditRequest {
    pub base_revision: u64,
    pub command: EditCommand,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UndoRequest {
    pub base_revision: u64,
}

/// Runs a writer operation off the async workers; edits refit instances.
async fn write<T: Serialize + Send + 'static>(
    s: Arc<Session>,
    op: impl FnOnce(&Session) -> Result<T, SessionError> + Send + 'static,
) -> Response {
    let current = s.revision();
    let result = tokio::task::spawn_blocking(move || op(&s)).await;
    match result {
        Ok(Ok(receipt)) => {
            let body = serde_json::to_value(&receipt).unwrap_or_default();
            let revision = body["revision"].as_u64().unwrap_or(current);
            with_revision(revision, Json(body))
        }
        Ok(Err(e)) => session_error(e, current),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), current),
    }
}

async fn edit(State(s): State<Arc<Session>>, body: Result<Json<EditRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => write(s, move |s| s.apply(req.base_revision, req.command)).await,
        Err(e) => error(StatusCode::BAD_REQUEST, e.body_text(), s.revision()),
    }
}

async fn undo(State(s): State<Arc<Session>>, body: Result<Json<UndoRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => write(s, move |s| s.undo(req.base_revision)).await,
        Err(e) => error(StatusCode::BAD_REQUEST, e.body_text(), s.revision()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub kind: TableKind,
    /// Selected row indices of the current feature table.
    pub rows: Vec<usize>,
}

async fn selection(State(s): State<Arc<Session>>, body: Result<Json<SelectionRequest>, JsonRejection>) -> Response {
    let req = match body {
        Ok(Json(req)) => req,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text(), s.revision()),
    };
    match s.select(req.kind, &req.rows) {
        Ok((revision, path)) => with_revision(
            revision,
            Json(json!({ "revision": revision, "file": path.file_name().map(|f| f.to_string_lossy()) })),
        ),
        Err(e) => session_error(e, s.revision()),
    }
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    after: u64,
    timeout_ms: Option<u64>,
}

async fn events(State(s): State<Arc<Session>>, Query(q): Query<EventsQuery>) -> Response {
    let wait = Duration::from_millis(q.timeout_ms.unwrap_or(DEFAULT_WAIT_MS).min(MAX_WAIT_MS));
    let (events, last) = s.events(q.after, wait).await;
    let revision = s.revision();
    with_revision(
        revision,
        Json(json!({ "revision": revision, "last": last, "events": events })),
    )
}
