//! Typed async client for the synthesis service.

use std::time::Duration;

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use url::Url;

use heursynth_core::api::{
    DifficultyRequest, DifficultyResponse, ErrorBody, ErrorKind, GenerateRequest, GenerateResponse, GradeRequest,
    GradeResponse, HealthResponse, JobAccepted, JobState, JobStatus, ReportRequest, ReportResponse, StabilityRequest,
    SynthesizeRequest,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid server url: {0}")]
    Url(#[from] url::ParseError),
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("server answered {status}: {}", body.message)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response from {url}: {reason}")]
    Decode { url: String, reason: String },
}

impl ClientError {
    /// The error category, with transport and decoding failures counted as runtime errors.
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClientError::Api { body, .. } => body.kind,
            ClientError::Url(_) => ErrorKind::Usage,
            _ => ErrorKind::Runtime,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
    poll_interval: Duration,
}

impl Client {
    pub fn new(base: &str) -> Result<Self, ClientError> {
        let mut base = Url::parse(base)?;
        if !base.path().ends_with('/') {
            base.set_path(&format!("{}/", base.path()));
        }
        Ok(Client {
            base,
            http: reqwest::Client::new(),
            poll_interval: Duration::from_millis(100),
        })
    }

    pub fn with_poll_interval(mut self, interval: Duration) -> Self {
        self.poll_interval = interval;
        self
    }

    pub fn base_url(&self) -> &Url {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(url: &Url, resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|source| ClientError::Transport {
            url: url.to_string(),
            source,
        })?;
        if !status.is_success() {
            let body = serde_json::from_slice::<ErrorBody>(&bytes).unwrap_or_else(|_| ErrorBody {
                kind: if status.is_client_error() {
                    ErrorKind::Usage
                } else {
                    ErrorKind::Runtime
                },
                message: String::from_utf8_lossy(&bytes).into_owned(),
            });
            return Err(ClientError::Api { status, body });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
            url: url.to_string(),
            reason: e.to_string(),
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let url = self.base.join(path)?;
        let resp = self.http.get(url.clone()).send().await.map_err(|source| ClientError::Transport {
            url: url.to_string(),
            source,
        })?;
        Self::decode(&url, resp).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let url = self.base.join(path)?;
        let resp = self
            .http
            .post(url.clone())
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.to_string(),
                source,
            })?;
        Self::decode(&url, resp).await
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        self.get("v1/health").await
    }

    pub async fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse, ClientError> {
        self.post("v1/datasets/generate", req).await
    }

    pub async fn grade(&self, req: &GradeRequest) -> Result<GradeResponse, ClientError> {
        self.post("v1/grade", req).await
    }

    pub async fn difficulty(&self, req: &DifficultyRequest) -> Result<DifficultyResponse, ClientError> {
        self.post("v1/difficulty", req).await
    }

    pub async fn submit_run(&self, req: &SynthesizeRequest) -> Result<JobAccepted, ClientError> {
        self.post("v1/runs", req).await
    }

    pub async fn submit_stability(&self, req: &StabilityRequest) -> Result<JobAccepted, ClientError> {
        self.post("v1/stability", req).await
    }

    pub async fn job(&self, job_id: &str) -> Result<JobStatus, ClientError> {
        self.get(&format!("v1/jobs/{job_id}")).await
    }

    /// Polls until the job leaves the running state.
    pub async fn wait_job(&self, job_id: &str) -> Result<JobStatus, ClientError> {
        loop {
            let status = self.job(job_id).await?;
            if status.state != JobState::Running {
                return Ok(status);
            }
            tokio::time::sleep(self.poll_interval).await;
        }
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<ReportResponse, ClientError> {
        self.post("v1/reports", req).await
    }
}
