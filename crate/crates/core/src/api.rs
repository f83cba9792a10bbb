//! Request and response bodies of the HTTP service, shared by server and client.
//!
//! Datasets, instances and configs travel as plain JSON values in their
//! file formats so the service accepts exactly what the CLI reads from disk.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::evaluate::{InstanceScore, RawOutcome};
use crate::pipeline::SynthesisSummary;
use crate::problem::{DomainId, SizeClass, Split};
use crate::report::{DifficultyRow, ReportFiles};
use crate::search::StabilitySummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub domain: DomainId,
    pub size: SizeClass,
    pub split: Split,
    pub count: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Attach oracle reference objectives (small instances only).
    #[serde(default)]
    pub with_references: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub dataset: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRequest {
    pub domain: DomainId,
    /// One instance in dataset-entry form.
    pub instance: Value,
    pub solution: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeResponse {
    pub instance_id: String,
    pub outcome: RawOutcome,
    /// Absent when the instance has no reference objective.
    pub score: Option<InstanceScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRequest {
    pub dataset: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyResponse {
    pub rows: Vec<DifficultyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizeRequest {
    pub config: Value,
    pub dev: Value,
    pub test: Value,
    /// Run directory on the server's filesystem.
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRequest {
    pub config: Value,
    pub dev: Value,
    pub test: Value,
    pub run_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub artifact_dir: PathBuf,
    /// Defaults to `<artifact_dir>/report`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JobResult {
    Synthesize(SynthesisSummary),
    Stability(StabilitySummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    pub result: Option<JobResult>,
    pub error: Option<ErrorBody>,
}

/// Error category, mirroring the CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Usage,
    Runtime,
    Partial,
    NotFound,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage | ErrorKind::NotFound => 1,
            ErrorKind::Runtime => 2,
            ErrorKind::Partial => 3,
        }
    }

    pub fn from_exit_code(code: i32) -> Self {
        match code {
            1 => ErrorKind::Usage,
            3 => ErrorKind::Partial,
            _ => ErrorKind::Runtime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub message: String,
}

pub type ReportResponse = ReportFiles;
