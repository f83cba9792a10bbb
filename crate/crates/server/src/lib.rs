//! HTTP/JSON front end over the synthesis pipeline.
//!
//! Short operations answer inline. Synthesis and stability runs are jobs:
//! `POST` returns a job id and `GET /v1/jobs/{id}` reports progress. Job work
//! runs on plain OS threads because model clients block.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;
use tokio::net::TcpListener;

use heursynth_core::api::{
    DifficultyRequest, DifficultyResponse, ErrorBody, ErrorKind, GenerateRequest, GenerateResponse, GradeRequest,
    GradeResponse, HealthResponse, JobAccepted, JobResult, JobState, JobStatus, ReportRequest, ReportResponse,
    StabilityRequest, SynthesizeRequest,
};
use heursynth_core::config::RunConfig;
use heursynth_core::evaluate::grade;
use heursynth_core::evaluate::oracle::attach_oracle_references;
use heursynth_core::pipeline::{self, PipelineError};
use heursynth_core::problem::generate_dataset;
use heursynth_core::report::{difficulty_rows, domain_has_difficulty};
use heursynth_core::{Dataset, ProblemInstance};

/// An error response: HTTP status plus a typed body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    pub fn usage(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                kind: ErrorKind::Usage,
                message: message.into(),
            },
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                kind: ErrorKind::NotFound,
                message: message.into(),
            },
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                kind: ErrorKind::Runtime,
                message: message.into(),
            },
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let kind = ErrorKind::from_exit_code(e.exit_code());
        let status = match kind {
            ErrorKind::Usage => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            body: ErrorBody {
                kind,
                message: e.to_string(),
            },
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::usage(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Default)]
struct Jobs {
    next: AtomicU64,
    table: Mutex<HashMap<String, JobStatus>>,
}

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<Jobs>,
}

impl AppState {
    fn start_job(&self, work: impl FnOnce() -> Result<JobResult, PipelineError> + Send + 'static) -> JobAccepted {
        let job_id = format!("job-{}", self.jobs.next.fetch_add(1, Ordering::Relaxed) + 1);
        let status = JobStatus {
            job_id: job_id.clone(),
            state: JobState::Running,
            result: None,
            error: None,
        };
        self.jobs.table.lock().expect("job table").insert(job_id.clone(), status);
        let jobs = self.jobs.clone();
        let id = job_id.clone();
        std::thread::spawn(move || {
            let outcome = work();
            let mut table = jobs.table.lock().expect("job table");
            let entry = table.get_mut(&id).expect("job registered before start");
            match outcome {
                Ok(result) => {
                    entry.state = JobState::Succeeded;
                    entry.result = Some(result);
                }
                Err(e) => {
                    tracing::warn!(job = %id, error = %e, "job failed");
                    entry.state = JobState::Failed;
                    entry.error = Some(ApiError::from(e).body);
                }
            }
        });
        JobAccepted { job_id }
    }
}

fn parse_dataset(value: &Value, what: &str) -> Result<Dataset, ApiError> {
    Dataset::from_value(value).map_err(|e| ApiError::usage(format!("{what}: {e}")))
}

fn parse_config(value: Value) -> Result<RunConfig, ApiError> {
    RunConfig::from_value(value).map_err(|e| ApiError::from(PipelineError::from(e)))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::runtime(format!("worker task failed: {e}")))?
        .map(Json)
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn generate(req: Result<Json<GenerateRequest>, JsonRejection>) -> ApiResult<GenerateResponse> {
    let Json(req) = req?;
    if req.count == 0 {
        return Err(ApiError::usage("count must be at least 1"));
    }
    blocking(move || {
        let mut dataset = generate_dataset(req.domain, req.size, req.base_seed, req.count, req.split);
        if req.with_references {
            dataset = attach_oracle_references(dataset).map_err(|e| ApiError::usage(e.to_string()))?;
        }
        Ok(GenerateResponse {
            dataset: dataset.to_value(),
        })
    })
    .await
}

async fn grade_one(req: Result<Json<GradeRequest>, JsonRejection>) -> ApiResult<GradeResponse> {
    let Json(req) = req?;
    let instance =
        ProblemInstance::from_value(req.domain, &req.instance).map_err(|e| ApiError::usage(format!("instance: {e}")))?;
    let (outcome, score) = grade(&instance, &req.solution);
    Ok(Json(GradeResponse {
        instance_id: instance.instance_id,
        outcome,
        score,
    }))
}

async fn difficulty(req: Result<Json<DifficultyRequest>, JsonRejection>) -> ApiResult<DifficultyResponse> {
    let Json(req) = req?;
    let dataset = parse_dataset(&req.dataset, "dataset")?;
    if !domain_has_difficulty(dataset.domain) {
        return Err(ApiError::usage(format!(
            "no difficulty proxy for {}",
            dataset.domain.as_str()
        )));
    }
    let rows = difficulty_rows(&dataset)
        .map_err(|e| ApiError::usage(e.to_string()))?
        .expect("domain has a proxy");
    Ok(Json(DifficultyResponse { rows }))
}

fn run_id_for(out_dir: &Path) -> String {
    out_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

async fn start_run(
    State(state): State<AppState>,
    req: Result<Json<SynthesizeRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<JobAccepted>), ApiError> {
    let Json(req) = req?;
    let config = parse_config(req.config)?;
    let dev = parse_dataset(&req.dev, "dev")?;
    let test = parse_dataset(&req.test, "test")?;
    pipeline::validate_datasets(&dev, &test)?;
    if !req.out_dir.is_absolute() {
        return Err(ApiError::usage("out_dir must be an absolute path"));
    }
    let out_dir: PathBuf = req.out_dir;
    let run_id = req.run_id.unwrap_or_else(|| run_id_for(&out_dir));
    let accepted = state.start_job(move || {
        pipeline::synthesize(&config, &dev, &test, &out_dir, &run_id).map(JobResult::Synthesize)
    });
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

async fn start_stability(
    State(state): State<AppState>,
    req: Result<Json<StabilityRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<JobAccepted>), ApiError> {
    let Json(req) = req?;
    let config = parse_config(req.config)?;
    let dev = parse_dataset(&req.dev, "dev")?;
    let test = parse_dataset(&req.test, "test")?;
    pipeline::validate_datasets(&dev, &test)?;
    if req.run_count < 2 {
        return Err(ApiError::usage(format!("run_count must be at least 2, got {}", req.run_count)));
    }
    let run_count = req.run_count;
    let accepted = state.start_job(move || {
        pipeline::stability(&config, &dev, &test, run_count).map(JobResult::Stability)
    });
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

async fn job_status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<JobStatus> {
    state
        .jobs
        .table
        .lock()
        .expect("job table")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}

async fn report(req: Result<Json<ReportRequest>, JsonRejection>) -> ApiResult<ReportResponse> {
    let Json(req) = req?;
    let out = req.out_dir.unwrap_or_else(|| req.artifact_dir.join("report"));
    blocking(move || Ok(pipeline::report(&req.artifact_dir, &out)?)).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/datasets/generate", post(generate))
        .route("/v1/grade", post(grade_one))
        .route("/v1/difficulty", post(difficulty))
        .route("/v1/runs", post(start_run))
        .route("/v1/stability", post(start_stability))
        .route("/v1/jobs/{id}", get(job_status))
        .route("/v1/reports", post(report))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}
