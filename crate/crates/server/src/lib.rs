//! Review API: pages through a compiled memory, accepts decisions and exports
//! the memory with every decision applied.
//!
//! | route                      | method | body / query          |
//! |----------------------------|--------|-----------------------|
//! | `/units`                   | GET    | `UnitQuery` as query  |
//! | `/units/{id}`              | GET    |                       |
//! | `/units/{id}/decision`     | POST   | `DecisionRequest`     |
//! | `/export`                  | GET    | returns TMX           |
//! | `/stats`                   | GET    | returns `CorpusStats` |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forge_core::review::{DecisionRequest, ErrorBody, ReviewError, ReviewSession, UnitPage, UnitQuery, UnitView};
use forge_core::tmx::CorpusStats;
use tokio::net::TcpListener;
use tokio::sync::RwLock;

pub const TMX_CONTENT_TYPE: &str = "application/x-tmx+xml; charset=utf-8";

type Shared = Arc<RwLock<ReviewSession>>;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let status = match &e {
            ReviewError::UnknownUnit(_) => StatusCode::NOT_FOUND,
            ReviewError::InvalidDecision(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::Tm(_) | ReviewError::Log { .. } | ReviewError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(r.status(), r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!("{}", self.message);
        }
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

async fn list_units(
    State(session): State<Shared>,
    query: Result<Query<UnitQuery>, QueryRejection>,
) -> Result<Json<UnitPage>, ApiError> {
    let Query(q) = query?;
    match session.read().await.list(&q) {
        // The only TM error a listing can raise is an unknown status filter.
        Err(ReviewError::Tm(e)) => Err(ApiError::new(StatusCode::BAD_REQUEST, e.to_string())),
        other => Ok(Json(other?)),
    }
}

async fn get_unit(State(session): State<Shared>, Path(id): Path<String>) -> Result<Json<UnitView>, ApiError> {
    Ok(Json(session.read().await.get(&id)?))
}

async fn post_decision(
    State(session): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<UnitView>, ApiError> {
    let Json(req) = body?;
    let decision = req.into_decision(&id)?;
    // The write lock serializes log appends; the append is fsynced before
    // the response goes out.
    let mut guard = session.write().await;
    let view = guard.submit(decision)?;
    tracing::info!(tu_id = %id, "decision recorded");
    Ok(Json(view))
}

async fn export(State(session): State<Shared>) -> Result<Response, ApiError> {
    let text = session.read().await.export()?;
    Ok(([(header::CONTENT_TYPE, TMX_CONTENT_TYPE)], text).into_response())
}

async fn stats(State(session): State<Shared>) -> Json<CorpusStats> {
    Json(session.read().await.stats())
}

pub fn router(session: ReviewSession) -> Router {
    Router::new()
        .route("/units", get(list_units))
        .route("/units/{id}", get(get_unit))
        .route("/units/{id}/decision", post(post_decision))
        .route("/export", get(export))
        .route("/stats", get(stats))
        .with_state(Arc::new(RwLock::new(session)))
}

/// Serves until the future is dropped or the listener fails.
pub async fn serve(listener: TcpListener, session: ReviewSession) -> std::io::Result<()> {
    axum::serve(listener, router(session)).await
}

/// A server running on a background task; stops when dropped.
pub struct RunningServer {
    pub addr: SocketAddr,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn spawn(addr: SocketAddr, session: ReviewSession) -> std::io::Result<RunningServer> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(serve(listener, session));
    Ok(RunningServer { addr, task })
}
