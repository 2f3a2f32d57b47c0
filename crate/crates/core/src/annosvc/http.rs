use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::{AnnoError, ItemSpec, Next, Store, Task};

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<AnnoError> for ApiError {
    fn from(e: AnnoError) -> Self {
        let status = match &e {
            AnnoError::UnknownSession(_) | AnnoError::UnknownItem(_) => StatusCode::NOT_FOUND,
            AnnoError::AlreadyLabeled(_) | AnnoError::AnnotatorMismatch { .. } => StatusCode::CONFLICT,
            AnnoError::Io(_) | AnnoError::CorruptJournal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

fn bad_request(message: String) -> ApiError {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "BadRequest",
        message,
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(e.to_string()))
}

/// Journal writes sync to disk, so they run off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, AnnoError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "Internal",
            message: e.to_string(),
        })?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct CreateBody {
    task: String,
    items: Vec<ItemSpec>,
}

#[derive(Deserialize)]
struct LabelBody {
    item_id: String,
    label: String,
    annotator: String,
    #[serde(default)]
    overwrite: bool,
}

async fn create(State(store): State<Arc<Store>>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = parse_body(&body)?;
    let task: Task = body.task.parse().map_err(bad_request)?;
    let id = blocking(move || store.create_session(task, body.items)).await?;
    Ok((StatusCode::OK, Json(json!({"session_id": id}))).into_response())
}

async fn next(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(match store.next_item(&id)? {
        Next::Item(item) => Json(serde_json::to_value(item).expect("item serializes")).into_response(),
        Next::Done => Json(json!({"done": true})).into_response(),
    })
}

async fn label(State(store): State<Arc<Store>>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: LabelBody = parse_body(&body)?;
    blocking(move || store.submit_label(&id, &b.item_id, &b.label, &b.annotator, b.overwrite)).await?;
    Ok(Json(json!({"ok": true})).into_response())
}

async fn export(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let body = store.export_jsonl(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn state(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.state(&id)?).into_response())
}

/// Routes; the optional directory is served for every other path.
pub fn router(store: Arc<Store>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/labels", post(label))
        .route("/sessions/{id}/export", get(export))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Bind and serve until the process exits. Prints the bound address once listening.
pub async fn serve(store: Arc<Store>, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, static_dir)).await
}
