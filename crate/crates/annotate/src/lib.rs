//! Annotation service: serves unlabeled injected samples to human
//! annotators and scores their answers against the withheld labels.
//!
//! Endpoints:
//! - `GET /api/tasks/next?problem=&annotator=`: the first task this
//!   annotator has not answered (200), or 204 when all are done.
//! - `POST /api/tasks/{id}/answer`: `{annotator_id, sentence_index | fraction}`.
//! - `GET /api/report`: pooled and per-annotator F1 / MSE.
//! - everything else: static files of the UI, when configured.

pub mod report;
pub mod store;
pub mod study;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use plothole::error::IoError;
use plothole::inject::Problem;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::services::ServeDir;

pub use report::{human_baselines, human_report, AnnotatorScore, HumanReport};
pub use store::{Answer, AnswerStore, HumanAnswer};
pub use study::{AnnotationTask, Label, Study, StudyTask};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("answer store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Server(std::io::Error),
}

/// Shared request state. The store mutex serializes submissions and task
/// assignment.
#[derive(Clone)]
pub struct AppState {
    pub study: Arc<Study>,
    pub store: Arc<Mutex<AnswerStore>>,
    pub clock: fn() -> u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl AppState {
    pub fn new(study: Study, store: AnswerStore) -> Self {
        Self { study: Arc::new(study), store: Arc::new(Mutex::new(store)), clock: unix_now }
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub problem: Option<String>,
    pub annotator: Option<String>,
}

async fn next_task(State(s): State<AppState>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    let problem: Problem = q
        .problem
        .as_deref()
        .ok_or_else(|| bad_request("query parameter `problem` is required"))?
        .parse()
        .map_err(|e: String| bad_request(e))?;
    let annotator = q.annotator.filter(|a| !a.trim().is_empty()).ok_or_else(|| bad_request("query parameter `annotator` is required"))?;
    let store = s.store.lock().map_err(internal)?;
    match s.study.tasks(problem).iter().find(|t| !store.has_answer(&t.task.task_id, &annotator)) {
        Some(t) => Ok(Json(&t.task).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerBody {
    pub annotator_id: String,
    pub sentence_index: Option<usize>,
    pub fraction: Option<f64>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct Stored {
    pub task_id: String,
    pub annotator_id: String,
    pub stored: bool,
}

/// Checks an answer against its task and turns it into a stored record.
pub fn validate_answer(task: &StudyTask, body: &AnswerBody, timestamp: u64) -> Result<HumanAnswer, String> {
    if body.annotator_id.trim().is_empty() {
        return Err("annotator_id must be nonempty".into());
    }
    let answer = match (task.task.problem, body.sentence_index, body.fraction) {
        (Problem::Continuity, Some(i), None) => {
            let n = task.task.sentences.len();
            if i >= n {
                return Err(format!("sentence_index {i} out of range for {n} sentences"));
            }
            Answer::SentenceIndex { sentence_index: i }
        }
        (Problem::Unresolved, None, Some(f)) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("fraction {f} outside [0, 1]"));
            }
            Answer::Fraction { fraction: f }
        }
        (Problem::Continuity, _, _) => return Err("continuity answers carry exactly `sentence_index`".into()),
        (Problem::Unresolved, _, _) => return Err("unresolved answers carry exactly `fraction`".into()),
    };
    Ok(HumanAnswer { task_id: task.task.task_id.clone(), annotator_id: body.annotator_id.clone(), answer, timestamp })
}

async fn submit(
    State(s): State<AppState>,
    Path(task_id): Path<String>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> Result<Json<Stored>, ApiError> {
    let Json(body) = body.map_err(|e| invalid(e.body_text()))?;
    let task = s.study.get(&task_id).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown task {task_id}")))?;
    let answer = validate_answer(task, &body, (s.clock)()).map_err(invalid)?;
    let mut store = s.store.lock().map_err(internal)?;
    store.submit(answer).map_err(internal)?;
    Ok(Json(Stored { task_id, annotator_id: body.annotator_id, stored: true }))
}

async fn report(State(s): State<AppState>) -> Result<Json<HumanReport>, ApiError> {
    let store = s.store.lock().map_err(internal)?;
    Ok(Json(human_report(&s.study, store.answers())))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{id}/answer", post(submit))
        .route("/api/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Directory holding `{problem}_test.jsonl`.
    pub datasets: PathBuf,
    pub answers: PathBuf,
    pub n_tasks: usize,
    pub seed: u64,
    pub static_dir: Option<PathBuf>,
}

/// Loads the study and answer log, binds, and serves until Ctrl-C.
pub async fn serve(config: ServeConfig) -> Result<(), AnnotateError> {
    let study = Study::from_datasets(&config.datasets, config.n_tasks, config.seed)?;
    let store = AnswerStore::open(&config.answers)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|source| AnnotateError::Bind { addr: addr.clone(), source })?;
    let local: SocketAddr = listener.local_addr().map_err(AnnotateError::Server)?;
    log::info!("annotation service on http://{local}");
    let app = router(AppState::new(study, store), config.static_dir);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(AnnotateError::Server)
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServeConfig) -> Result<(), AnnotateError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(AnnotateError::Server)?;
    rt.block_on(serve(config))
}
