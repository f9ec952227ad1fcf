//! Local HTTP service: single runs answer synchronously, ensembles run as
//! jobs in an in-memory table that evicts the oldest entries.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mark0_core::export::{RunDocument, VERSION};
use mark0_core::{run_ensemble_with_cancel, run_seed, EnsembleSummary, Error, ScenarioConfig, PRESETS};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

/// Jobs kept before the oldest is dropped.
pub const JOB_CAPACITY: usize = 64;

pub const BUILD: &str = match option_env!("MARK0_BUILD_HASH") {
    Some(h) => h,
    None => "unknown",
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    /// Full scenario document; takes precedence over `preset`.
    pub config: Option<Value>,
    pub preset: Option<String>,
    /// Dotted path to value, applied after `config` or `preset`.
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    /// One seed runs synchronously; more start a job.
    pub seeds: Option<Vec<u64>>,
    pub stride: Option<u32>,
}

#[derive(Debug, Serialize)]
pub struct SimulateResponse {
    pub run_id: String,
    #[serde(flatten)]
    pub run: RunDocument,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum JobState {
    Running,
    Done { result: Box<EnsembleSummary> },
    Failed { error: String },
    Cancelled,
}

struct Job {
    state: JobState,
    cancel: Arc<AtomicBool>,
}

#[derive(Default)]
struct JobTable {
    jobs: HashMap<String, Job>,
    order: VecDeque<String>,
}

impl JobTable {
    fn insert(&mut self, id: String, job: Job) {
        while self.order.len() >= JOB_CAPACITY {
            if let Some(old) = self.order.pop_front() {
                if let Some(j) = self.jobs.remove(&old) {
                    j.cancel.store(true, Ordering::Relaxed);
                }
            }
        }
        self.order.push_back(id.clone());
        self.jobs.insert(id, job);
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<Mutex<JobTable>>,
    next: Arc<AtomicU64>,
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/v1/presets", get(presets))
        .route("/api/v1/simulate", post(simulate))
        .route("/api/v1/jobs/{id}", get(job_status).delete(cancel_job))
        .with_state(AppState::default())
}

pub async fn serve(addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(addr, "listening");
    eprintln!("mark0 service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn bad_request(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": message.into(), "field": field }),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Config { key, .. } => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": message, "field": key }),
            },
            Error::Regime { key, .. } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": message, "field": key }),
            },
            Error::NonFinite { month, field } => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: json!({ "error": message, "month": month, "field": field }),
            },
            Error::Cancelled(month) => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: json!({ "error": message, "month": month }),
            },
            _ => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: json!({ "error": message }),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": VERSION, "build": BUILD }))
}

async fn presets() -> Json<Value> {
    let list: Vec<Value> = PRESETS
        .iter()
        .map(|name| {
            let config = ScenarioConfig::preset(name).expect("built-in preset");
            json!({ "name": name, "config": config.to_json() })
        })
        .collect();
    Json(Value::Array(list))
}

/// Decode and validate a request body. Unknown or ill-typed fields are
/// reported by name.
fn parse_request(body: &[u8]) -> Result<(ScenarioConfig, Vec<u64>, u32), ApiError> {
    let doc: Value = serde_json::from_slice(body).map_err(|e| ApiError::bad_request("body", e.to_string()))?;
    let req: SimulateRequest = serde_json::from_value(doc).map_err(|e| {
        let text = e.to_string();
        let field = text
            .split('`')
            .nth(1)
            .filter(|_| text.starts_with("unknown field"))
            .unwrap_or("body")
            .to_string();
        ApiError::bad_request(&field, text)
    })?;
    let into = ApiError::from;
    let mut config = match (req.config, req.preset) {
        (Some(doc), _) => ScenarioConfig::from_json_value(doc).map_err(into)?,
        (None, Some(name)) => ScenarioConfig::preset(&name).map_err(into)?,
        (None, None) => return Err(ApiError::bad_request("config", "either `config` or `preset` is required")),
    };
    for (path, value) in req.overrides {
        config.set(&path, value).map_err(into)?;
    }
    if let Some(s) = req.stride {
        config.run.stride = s;
    }
    config.validate().map_err(into)?;
    let seeds = req.seeds.unwrap_or_else(|| vec![config.run.seed]);
    if seeds.is_empty() {
        return Err(ApiError::bad_request("seeds", "at least one seed is required"));
    }
    let stride = config.run.stride;
    Ok((config, seeds, stride))
}

async fn simulate(State(state): State<AppState>, body: Bytes) -> Response {
    let (config, seeds, stride) = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    if seeds.len() == 1 {
        let seed = seeds[0];
        let run = tokio::task::spawn_blocking(move || {
            run_seed(&config, seed, None).map(|out| {
                let doc = RunDocument::new(&config, &out, stride);
                SimulateResponse {
                    run_id: format!("{}-{seed}", &doc.config_hash[..16]),
                    run: doc,
                }
            })
        })
        .await;
        return match run {
            Ok(Ok(resp)) => Json(resp).into_response(),
            Ok(Err(e)) => {
                warn!(error = %e, "run failed");
                ApiError::from(e).into_response()
            }
            Err(e) => ApiError::from(Error::Serialization(format!("worker failed: {e}"))).into_response(),
        };
    }

    let id = format!("job-{}", state.next.fetch_add(1, Ordering::Relaxed) + 1);
    let cancel = Arc::new(AtomicBool::new(false));
    state.jobs.lock().expect("job table").insert(
        id.clone(),
        Job {
            state: JobState::Running,
            cancel: cancel.clone(),
        },
    );
    let jobs = state.jobs.clone();
    let job_id = id.clone();
    tokio::task::spawn_blocking(move || {
        let result = run_ensemble_with_cancel(&config, &seeds, Some(&cancel));
        let mut table = jobs.lock().expect("job table");
        if let Some(job) = table.jobs.get_mut(&job_id).filter(|j| matches!(j.state, JobState::Running)) {
            job.state = match result {
                Ok(summary) => JobState::Done {
                    result: Box::new(summary),
                },
                Err(Error::Cancelled(_)) => JobState::Cancelled,
                Err(e) => JobState::Failed { error: e.to_string() },
            };
        }
    });
    (
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": id, "status_url": format!("/api/v1/jobs/{id}") })),
    )
        .into_response()
}

fn job_not_found(id: &str) -> Response {
    (StatusCode::NOT_FOUND, Json(json!({ "error": format!("no job `{id}`") }))).into_response()
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let table = state.jobs.lock().expect("job table");
    match table.jobs.get(&id) {
        Some(job) => {
            let mut body = serde_json::to_value(&job.state).unwrap_or_default();
            body["id"] = json!(id);
            Json(body).into_response()
        }
        None => job_not_found(&id),
    }
}

async fn cancel_job(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let mut table = state.jobs.lock().expect("job table");
    match table.jobs.get_mut(&id) {
        Some(job) => {
            job.cancel.store(true, Ordering::Relaxed);
            if matches!(job.state, JobState::Running) {
                job.state = JobState::Cancelled;
            }
            let mut body = serde_json::to_value(&job.state).unwrap_or_default();
            body["id"] = json!(id);
            Json(body).into_response()
        }
        None => job_not_found(&id),
    }
}
