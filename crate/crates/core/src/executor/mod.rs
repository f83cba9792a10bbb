//! Runs a candidate solver on every instance of a dataset and scores what it yields.
//!
//! Workers follow a line protocol: each stdout line `{"seq": n, "solution": {...}}`
//! is an improved solution, and the last one accepted before the deadline counts.

mod simulated;
mod stream;
mod subprocess;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::evaluate::{dataset_metrics, evaluate_value, normalize_score, InstanceScore, RawOutcome};
use crate::problem::{Dataset, ProblemInstance};

pub use simulated::{SimEvent, SimExit, SimScript, SimulatedRuntime};
pub use stream::{CappedLog, StreamState, WorkerExit, TRUNCATION_MARKER};
pub use subprocess::{probe_network_isolation, SandboxPolicy, SubprocessRuntime};

pub const DEFAULT_GRACE_S: f64 = 1.0;
pub const DEFAULT_LOG_CAP_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    Crashed,
    YieldedNothing,
    TimeoutNoYield,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::Crashed => "crashed",
            Status::YieldedNothing => "yielded-nothing",
            Status::TimeoutNoYield => "timeout-no-yield",
        }
    }
}

/// What one worker did on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub instance_id: String,
    pub status: Status,
    pub last_solution: Option<Value>,
    pub yield_count: u32,
    pub stdout_log: String,
    pub stderr_log: String,
    /// Seconds, capped at the deadline plus grace.
    pub wall_time: f64,
}

/// An execution outcome with the evaluator's verdict on its last solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedOutcome {
    #[serde(flatten)]
    pub outcome: ExecutionOutcome,
    pub evaluation: Option<RawOutcome>,
    pub score: InstanceScore,
}

impl EvaluatedOutcome {
    pub fn evaluate(outcome: ExecutionOutcome, instance: &ProblemInstance, reference: f64) -> Self {
        let evaluation = outcome
            .last_solution
            .as_ref()
            .map(|s| evaluate_value(instance, s));
        let score = evaluation
            .as_ref()
            .map_or(InstanceScore::ZERO, |e| normalize_score(e, reference));
        EvaluatedOutcome {
            outcome,
            evaluation,
            score,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.outcome.status == Status::Solved && self.evaluation.as_ref().is_some_and(RawOutcome::is_feasible)
    }
}

/// Per-instance outcomes in dataset order with the aggregate validity and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub outcomes: Vec<EvaluatedOutcome>,
    pub valid: u8,
    pub score: f64,
}

impl ExecutionReport {
    pub fn from_outcomes(outcomes: Vec<EvaluatedOutcome>) -> Result<Self, ExecutorError> {
        let scores: Vec<InstanceScore> = outcomes.iter().map(|o| o.score).collect();
        let metrics = dataset_metrics(&scores).map_err(|_| ExecutorError::EmptyDataset)?;
        let valid = outcomes.iter().all(EvaluatedOutcome::is_valid) as u8;
        Ok(ExecutionReport {
            outcomes,
            valid,
            score: metrics.mean_score,
        })
    }

    pub fn per_instance_scores(&self) -> Vec<InstanceScore> {
        self.outcomes.iter().map(|o| o.score).collect()
    }
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("dataset has no instances")]
    EmptyDataset,
    #[error("instance {0} has no reference objective")]
    MissingReference(String),
    #[error("worker runtime `{command}` could not be started: {reason}")]
    ShimUnavailable { command: String, reason: String },
    #[error("sandbox policy unsupported on this host: {0}")]
    PolicyUnsupported(String),
    #[error("timeout must be positive and finite, got {0}")]
    InvalidTimeout(f64),
    #[error("io error in executor: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a runtime needs to run one solver on one instance.
#[derive(Debug, Clone, Copy)]
pub struct WorkerRequest<'a> {
    pub solver_source: &'a str,
    pub instance: &'a ProblemInstance,
    pub timeout: Duration,
    pub grace: Duration,
    pub log_cap: usize,
    pub strict_crash_voids_yields: bool,
}

/// Runs one worker to completion.
pub trait WorkerRuntime: Send + Sync {
    fn run(&self, request: &WorkerRequest<'_>) -> Result<ExecutionOutcome, ExecutorError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecOptions {
    pub timeout_s: f64,
    #[serde(default = "default_grace")]
    pub grace_s: f64,
    /// Concurrent workers; defaults to the available cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_log_cap")]
    pub log_cap_bytes: usize,
    #[serde(default)]
    pub strict_crash_voids_yields: bool,
}

fn default_grace() -> f64 {
    DEFAULT_GRACE_S
}

fn default_log_cap() -> usize {
    DEFAULT_LOG_CAP_BYTES
}

impl ExecOptions {
    pub fn with_timeout(timeout_s: f64) -> Self {
        ExecOptions {
            timeout_s,
            grace_s: DEFAULT_GRACE_S,
            parallelism: None,
            log_cap_bytes: DEFAULT_LOG_CAP_BYTES,
            strict_crash_voids_yields: false,
        }
    }
}

/// Runs `solver_source` on every instance, at most `parallelism` at a time,
/// and returns outcomes in dataset order.
pub fn execute_solver(
    runtime: &dyn WorkerRuntime,
    solver_source: &str,
    dataset: &Dataset,
    options: &ExecOptions,
) -> Result<ExecutionReport, ExecutorError> {
    if dataset.is_empty() {
        return Err(ExecutorError::EmptyDataset);
    }
    if !(options.timeout_s.is_finite() && options.timeout_s > 0.0) {
        return Err(ExecutorError::InvalidTimeout(options.timeout_s));
    }
    if !(options.grace_s.is_finite() && options.grace_s >= 0.0) {
        return Err(ExecutorError::InvalidTimeout(options.grace_s));
    }
    let mut references = Vec::with_capacity(dataset.len());
    for inst in &dataset.instances {
        let r = inst
            .reference_objective
            .ok_or_else(|| ExecutorError::MissingReference(inst.instance_id.clone()))?;
        references.push(r);
    }
    let workers = options
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, dataset.len());
    let request_for = |inst| WorkerRequest {
        solver_source,
        instance: inst,
        timeout: Duration::from_secs_f64(options.timeout_s),
        grace: Duration::from_secs_f64(options.grace_s),
        log_cap: options.log_cap_bytes,
        strict_crash_voids_yields: options.strict_crash_voids_yields,
    };

    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<ExecutionOutcome, ExecutorError>>> =
        (0..dataset.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(inst) = dataset.instances.get(i) else { break };
                        done.push((i, runtime.run(&request_for(inst))));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("executor worker thread panicked") {
                slots[i] = Some(r);
            }
        }
    });

    let mut outcomes = Vec::with_capacity(dataset.len());
    for ((slot, inst), reference) in slots.into_iter().zip(&dataset.instances).zip(references) {
        let outcome = slot.expect("every instance index is claimed once")?;
        outcomes.push(EvaluatedOutcome::evaluate(outcome, inst, reference));
    }
    ExecutionReport::from_outcomes(outcomes)
}
