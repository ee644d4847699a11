//! HTTP API. Reads run against immutable atlas snapshots; only corpus
//! ingest, run creation, atlas promotion and import change state.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use evatlas_core::layout::Size;
use evatlas_core::query::{gap_matrix, run_query};
use evatlas_core::topic::{Backend, TopicRun};
use evatlas_core::{extract_topics_lexical, FilterState, IngestConfig, LayoutConfig, RunConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::task::AbortHandle;
use tower_http::cors::{Any, CorsLayer};

use crate::bundle::{Bundle, RunError, RunStatus};
use crate::llm::{run_llm, ChatClient, RunOutcome};
use crate::store::Store;
use crate::{canonical_json, topic_error_kind, StoreError};

pub const PORT_VAR: &str = "EVATLAS_PORT";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub llm: Option<Arc<dyn ChatClient>>,
    tasks: Arc<Mutex<HashMap<String, AbortHandle>>>,
}

impl AppState {
    pub fn new(store: Arc<Store>, llm: Option<Arc<dyn ChatClient>>) -> Self {
        Self {
            store,
            llm,
            tasks: Arc::default(),
        }
    }
}

pub struct ApiError(pub StoreError);

impl<E: Into<StoreError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, &self.0.to_json())
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        canonical_json(value),
    )
        .into_response()
}

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(json_response(StatusCode::OK, value))
}

/// Parses a JSON body; an empty body yields the type's default.
fn body_or_default<T: DeserializeOwned + Default>(body: &[u8]) -> Result<T, StoreError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| StoreError::BadRequest(format!("request body: {e}")))
}

fn body_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, StoreError> {
    serde_json::from_slice(body).map_err(|e| StoreError::BadRequest(format!("request body: {e}")))
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any);
    Router::new()
        .route("/corpora", post(create_corpus).get(list_corpora))
        .route("/corpora/{id}/runs", post(create_run).get(list_runs))
        .route("/runs/{run_id}", get(get_run))
        .route("/runs/{run_id}/cancel", post(cancel_run))
        .route("/corpora/{id}/atlas", post(promote))
        .route("/corpora/{id}/map", get(map))
        .route("/corpora/{id}/query", post(query))
        .route("/corpora/{id}/studies/{study_id}", get(study))
        .route("/corpora/{id}/gaps", get(gaps))
        .route("/corpora/{id}/stability", post(stability))
        .route("/corpora/{id}/export", get(export))
        .route("/import", post(import))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Default, Deserialize)]
struct IngestParams {
    title_col: Option<String>,
    authors_col: Option<String>,
    year_col: Option<String>,
    abstract_col: Option<String>,
    id_col: Option<String>,
    delimiter: Option<String>,
    source: Option<String>,
}

impl IngestParams {
    fn into_config(self) -> IngestConfig {
        let mut c = IngestConfig::default();
        let set = |slot: &mut String, v: Option<String>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.title_col, self.title_col);
        set(&mut c.authors_col, self.authors_col);
        set(&mut c.year_col, self.year_col);
        set(&mut c.abstract_col, self.abstract_col);
        set(&mut c.id_col, self.id_col);
        set(&mut c.delimiter, self.delimiter);
        set(&mut c.source, self.source);
        c
    }
}

#[derive(Debug, Deserialize)]
struct IngestDocument {
    csv: String,
    #[serde(default)]
    config: IngestConfig,
}

/// Accepts either a JSON `{csv, config}` document or a raw CSV body with
/// the ingest options as query parameters.
async fn create_corpus(
    State(state): State<AppState>,
    Query(params): Query<IngestParams>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (csv, config) = if is_json {
        let doc: IngestDocument = body_json(&body)?;
        (doc.csv, doc.config)
    } else {
        let csv = String::from_utf8(body.to_vec())
            .map_err(|_| StoreError::BadRequest("CSV body is not UTF-8".into()))?;
        (csv, params.into_config())
    };
    let store = state.store.clone();
    let outcome = tokio::task::spawn_blocking(move || store.ingest(&csv, &config))
        .await
        .map_err(|e| StoreError::Io(e.to_string()))??;
    let status = if outcome.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok(json_response(status, &outcome))
}

async fn list_corpora(State(state): State<AppState>) -> ApiResult {
    ok(&state.store.corpus_ids())
}

#[derive(Serialize)]
struct RunAccepted<'a> {
    run_id: &'a str,
    corpus_id: &'a str,
    status: RunStatus,
}

async fn create_run(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let config: RunConfig = body_or_default(&body)?;
    let corpus = state.store.corpus(&id)?;
    let store = state.store.clone();

    let handle = match config.backend {
        Backend::Lexical => {
            let record = store.start_run(&id, &config)?;
            let run_id = record.run_id.clone();
            let tasks = state.tasks.clone();
            let task_run_id = run_id.clone();
            let handle = tokio::spawn(async move {
                let job_config = config.clone();
                let result = tokio::task::spawn_blocking(move || {
                    extract_topics_lexical(&corpus, &job_config).map(|(model, assignments)| TopicRun {
                        model,
                        assignments,
                        warnings: Vec::new(),
                    })
                })
                .await;
                let result = match result {
                    Ok(r) => r.map_err(|e| RunError::new(topic_error_kind(&e), e.to_string())),
                    Err(e) => Err(RunError::new("Internal", e.to_string())),
                };
                finish(&store, &tasks, &task_run_id, RunOutcome { result, raw_reply: None });
            });
            (record, handle)
        }
        Backend::Llm => {
            let Some(client) = state.llm.clone() else {
                return Err(StoreError::Backend("no LLM client configured".into()).into());
            };
            let guard = store
                .llm_lock(&id)?
                .try_lock_owned()
                .map_err(|_| StoreError::Conflict(format!("an LLM run is already in flight for `{id}`")))?;
            let record = store.start_run(&id, &config)?;
            let tasks = state.tasks.clone();
            let task_run_id = record.run_id.clone();
            let handle = tokio::spawn(async move {
                let _guard = guard;
                let outcome = run_llm(&*client, &corpus, &config).await;
                finish(&store, &tasks, &task_run_id, outcome);
            });
            (record, handle)
        }
    };
    let (record, handle) = handle;
    if !handle.is_finished() {
        state
            .tasks
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record.run_id.clone(), handle.abort_handle());
    }
    Ok(json_response(
        StatusCode::ACCEPTED,
        &RunAccepted {
            run_id: &record.run_id,
            corpus_id: &id,
            status: record.status,
        },
    ))
}

fn finish(store: &Store, tasks: &Mutex<HashMap<String, AbortHandle>>, run_id: &str, outcome: RunOutcome) {
    tasks.lock().unwrap_or_else(|e| e.into_inner()).remove(run_id);
    if let Err(e) = store.finish_run(run_id, outcome) {
        tracing::warn!("run {run_id}: {e}");
    }
}

async fn list_runs(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(&state.store.runs(&id)?)
}

/// A run that failed in the LLM backend answers 502, with the record
/// (and any raw reply) as the body.
async fn get_run(State(state): State<AppState>, Path(run_id): Path<String>) -> ApiResult {
    let record = state.store.run(&run_id)?;
    let status = match &record.error {
        Some(e) if e.is_backend_failure() => StatusCode::BAD_GATEWAY,
        _ => StatusCode::OK,
    };
    Ok(json_response(status, &record))
}

async fn cancel_run(State(state): State<AppState>, Path(run_id): Path<String>) -> ApiResult {
    let handle = state
        .tasks
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .remove(&run_id);
    if let Some(h) = handle {
        h.abort();
    }
    let outcome = RunOutcome {
        result: Err(RunError::new("Cancelled", "cancelled by request")),
        raw_reply: None,
    };
    ok(&state.store.finish_run(&run_id, outcome)?)
}

#[derive(Debug, Deserialize)]
struct PromoteRequest {
    run_id: String,
    expected_version: Option<String>,
}

#[derive(Serialize)]
struct Promoted<'a> {
    corpus_id: &'a str,
    run_id: &'a str,
    atlas_version: &'a str,
}

async fn promote(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: PromoteRequest = body_json(&body)?;
    let store = state.store.clone();
    let (cid, rid) = (id.clone(), req.run_id.clone());
    let version = tokio::task::spawn_blocking(move || store.promote(&cid, &rid, req.expected_version.as_deref()))
        .await
        .map_err(|e| StoreError::Io(e.to_string()))??;
    ok(&Promoted {
        corpus_id: &id,
        run_id: &req.run_id,
        atlas_version: &version,
    })
}

#[derive(Debug, Deserialize)]
struct MapParams {
    seed: Option<u64>,
    width: Option<f64>,
    height: Option<f64>,
}

async fn map(State(state): State<AppState>, Path(id): Path<String>, Query(p): Query<MapParams>) -> ApiResult {
    let default = LayoutConfig::default();
    let config = LayoutConfig {
        seed: p.seed.unwrap_or(default.seed),
        canvas: Size::new(
            p.width.unwrap_or(default.canvas.width),
            p.height.unwrap_or(default.canvas.height),
        ),
    };
    ok(&state.store.map(&id, &config)?)
}

async fn query(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let filter: FilterState = body_or_default(&body)?;
    let atlas = state.store.atlas(&id)?;
    ok(&run_query(&atlas, &filter.canonical())?)
}

async fn study(State(state): State<AppState>, Path((id, study_id)): Path<(String, String)>) -> ApiResult {
    let atlas = state.store.atlas(&id)?;
    ok(&atlas.study_detail(&study_id)?)
}

#[derive(Debug, Deserialize)]
struct GapParams {
    row: String,
    col: String,
    /// Serialized FilterState.
    filter: Option<String>,
}

async fn gaps(State(state): State<AppState>, Path(id): Path<String>, Query(p): Query<GapParams>) -> ApiResult {
    let filter: FilterState = match p.filter {
        Some(f) => body_or_default(f.as_bytes())?,
        None => FilterState::default(),
    };
    let atlas = state.store.atlas(&id)?;
    ok(&gap_matrix(&atlas, &p.row, &p.col, &filter.canonical())?)
}

#[derive(Debug, Deserialize)]
struct StabilityRequest {
    run_ids: Vec<String>,
}

async fn stability(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: StabilityRequest = body_json(&body)?;
    let store = state.store.clone();
    let report = tokio::task::spawn_blocking(move || store.stability(&id, &req.run_ids))
        .await
        .map_err(|e| StoreError::Io(e.to_string()))??;
    ok(&report)
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(&state.store.export(&id)?)
}

#[derive(Serialize)]
struct Imported<'a> {
    corpus_id: &'a str,
}

async fn import(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let text = std::str::from_utf8(&body).map_err(|_| StoreError::BadRequest("body is not UTF-8".into()))?;
    let bundle = Bundle::from_json(text)?;
    let store = state.store.clone();
    let corpus_id = tokio::task::spawn_blocking(move || store.import(bundle))
        .await
        .map_err(|e| StoreError::Io(e.to_string()))??;
    Ok(json_response(StatusCode::CREATED, &Imported { corpus_id: &corpus_id }))
}
