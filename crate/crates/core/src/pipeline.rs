//! End-to-end operations: synthesize a solver, run the stability harness,
//! report on a run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ensure_unlocked, ArtifactError, FinalSummary, RunArtifact, RunMeta, RunStatus, RunWriter, TestResults};
use crate::config::{ConfigError, RunConfig};
use crate::executor::ExecutorError;
use crate::operators::{LedgerTotals, Operators};
use crate::problem::{task_description, Dataset, Split};
use crate::report::{write_report, ReportError, ReportFiles};
use crate::search::{evaluate_on, run_multi, run_search, SearchError, SearchInputs, StabilitySummary};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad inputs: caller-side problem, nothing was run.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Report(#[from] ReportError),
    /// The run failed after its directory was created; the partial artifact is on disk.
    #[error("run aborted ({error}); partial artifact kept at {}", out_dir.display())]
    Partial { out_dir: PathBuf, error: String },
}

impl PipelineError {
    /// Conventional process exit code: 1 usage, 2 runtime, 3 partial run persisted.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config(ConfigError::Parse { .. } | ConfigError::Invalid(_)) => 1,
            PipelineError::Partial { .. } => 3,
            _ => 2,
        }
    }
}

/// Checks split labels, a shared domain and reference objectives everywhere.
pub fn validate_datasets(dev: &Dataset, test: &Dataset) -> Result<(), PipelineError> {
    if dev.split != Split::Dev {
        return Err(PipelineError::Usage(format!("dev dataset declares split `{}`", dev.split)));
    }
    if test.split != Split::Test {
        return Err(PipelineError::Usage(format!("test dataset declares split `{}`", test.split)));
    }
    if dev.domain != test.domain {
        return Err(PipelineError::Usage(format!(
            "dev is {} but test is {}",
            dev.domain.as_str(),
            test.domain.as_str()
        )));
    }
    for (name, ds) in [("dev", dev), ("test", test)] {
        if ds.is_empty() {
            return Err(PipelineError::Usage(format!("{name} dataset is empty")));
        }
        if let Some(inst) = ds.instances.iter().find(|i| i.reference_objective.is_none()) {
            return Err(PipelineError::Usage(format!(
                "{name} instance {} has no reference_objective",
                inst.instance_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub run_id: String,
    pub out_dir: PathBuf,
    pub selected_record_id: String,
    pub dev_valid: u8,
    pub dev_score: f64,
    pub test_mean_valid: f64,
    pub test_mean_score: f64,
    pub executions: u32,
    pub branches: u32,
    pub stranded_budget: u32,
    pub ledger: LedgerTotals,
}

fn build_operators(config: &RunConfig) -> Result<Operators, ConfigError> {
    Ok(Operators::new(config.roles.build()?, config.templates()?, config.rates.clone()))
}

/// Runs one synthesis into `out_dir` and evaluates the selection on the test split.
pub fn synthesize(
    config: &RunConfig,
    dev: &Dataset,
    test: &Dataset,
    out_dir: &Path,
    run_id: &str,
) -> Result<SynthesisSummary, PipelineError> {
    validate_datasets(dev, test)?;
    let runtime = config.sandbox.build_runtime()?;
    let mut ops = build_operators(config)?;
    let meta = RunMeta {
        run_id: run_id.to_string(),
        domain: dev.domain,
    };
    let mut writer = RunWriter::create(out_dir, &meta, config, dev, test)?;

    let inputs = SearchInputs {
        task_description: task_description(dev.domain),
        dev,
        runtime: runtime.as_ref(),
        exec: config.sandbox.exec_options(&config.search),
    };
    let run = run_search(&inputs, &config.search, &mut ops, &mut writer);
    let ledger = LedgerTotals::of(&run.ledger);
    let mut summary = FinalSummary {
        run_id: run_id.to_string(),
        status: RunStatus::Aborted,
        error: None,
        executions: run.state.executions,
        branches: run.state.branch_counter,
        stranded_budget: run.state.stranded_budget,
        selected_record_id: None,
        dev_valid: None,
        dev_score: None,
        test_mean_valid: None,
        test_mean_score: None,
        ledger: ledger.clone(),
    };
    let abort = |writer: RunWriter, mut summary: FinalSummary, error: String| {
        summary.error = Some(error.clone());
        writer.finish(&summary)?;
        Err(PipelineError::Partial {
            out_dir: out_dir.to_path_buf(),
            error,
        })
    };
    let selection = match run.outcome {
        Ok(s) => s,
        Err(e) => return abort(writer, summary, e.to_string()),
    };
    summary.selected_record_id = Some(selection.record.record_id.clone());
    summary.dev_valid = Some(selection.record.valid);
    summary.dev_score = Some(selection.record.score);

    let test_report = match evaluate_on(&inputs, test, &config.search, &selection.source) {
        Ok(r) => r,
        Err(e) => return abort(writer, summary, e.to_string()),
    };
    let results = TestResults::new(selection.record.record_id.clone(), test_report);
    writer.write_test_results(&results)?;
    summary.status = RunStatus::Complete;
    summary.test_mean_valid = Some(results.mean_valid);
    summary.test_mean_score = Some(results.mean_score);
    writer.finish(&summary)?;
    Ok(SynthesisSummary {
        run_id: run_id.to_string(),
        out_dir: out_dir.to_path_buf(),
        selected_record_id: selection.record.record_id,
        dev_valid: selection.record.valid,
        dev_score: selection.record.score,
        test_mean_valid: results.mean_valid,
        test_mean_score: results.mean_score,
        executions: summary.executions,
        branches: summary.branches,
        stranded_budget: summary.stranded_budget,
        ledger,
    })
}

/// `run_count` searches with fresh clients each; no artifacts are written.
pub fn stability(
    config: &RunConfig,
    dev: &Dataset,
    test: &Dataset,
    run_count: usize,
) -> Result<StabilitySummary, PipelineError> {
    validate_datasets(dev, test)?;
    if run_count < 2 {
        return Err(PipelineError::Usage(format!("run_count must be at least 2, got {run_count}")));
    }
    let runtime = config.sandbox.build_runtime()?;
    let inputs = SearchInputs {
        task_description: task_description(dev.domain),
        dev,
        runtime: runtime.as_ref(),
        exec: config.sandbox.exec_options(&config.search),
    };
    let summary = run_multi(&inputs, test, &config.search, run_count, |_| {
        build_operators(config).map_err(|e| SearchError::Config(e.to_string()))
    })?;
    Ok(summary)
}

/// Re-derives all report files from a run directory.
pub fn report(artifact_dir: &Path, out_dir: &Path) -> Result<ReportFiles, PipelineError> {
    ensure_unlocked(artifact_dir)?;
    let artifact = RunArtifact::load(artifact_dir)?;
    Ok(write_report(&artifact, out_dir)?)
}

impl From<ExecutorError> for PipelineError {
    fn from(e: ExecutorError) -> Self {
        PipelineError::Search(SearchError::Executor(e))
    }
}
