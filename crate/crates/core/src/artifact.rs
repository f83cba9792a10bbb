//! On-disk run directory, written incrementally while the search runs.
//!
//! Layout (all names fixed):
//!
//! ```text
//! run.json            run id and domain
//! config.json         configuration snapshot
//! datasets/dev.json   datasets/test.json
//! trace.jsonl         one trace event per line
//! records.jsonl       one record per line
//! ledger.jsonl        one model call per line
//! global_memory.json  rewritten after every reflection
//! convergence.csv     one row per execution
//! solvers/<record_id> solver sources, write-once
//! test_results.json   selected solver on the test split
//! final.json          written last; status complete or aborted
//! run.lock            present while a writer owns the directory
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::RunConfig;
use crate::executor::{EvaluatedOutcome, ExecutionReport};
use crate::memory::{GlobalMemory, Record};
use crate::operators::{LedgerEntry, LedgerTotals};
use crate::problem::{Dataset, DomainId, ProblemError};
use crate::search::{SearchObserver, TraceEvent};

pub const LOCK_FILE: &str = "run.lock";
pub const CONVERGENCE_HEADER: &str = "exec_index,record_id,branch_id,depth,v,f,best_v,best_f,best_any_f,branch_start\n";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("run directory {0} is locked by a running synthesis")]
    Locked(String),
    #[error("run directory {0} already holds a run")]
    NotEmpty(String),
    #[error("corrupt artifact {file} line {line}: {reason}")]
    Corrupt { file: String, line: usize, reason: String },
    #[error("artifact is missing {0}")]
    Missing(String),
    #[error("artifact dataset is invalid: {0}")]
    Dataset(#[from] ProblemError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Identity of the run, written first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub domain: DomainId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Aborted,
}

/// The selected solver's evaluation on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResults {
    pub selected_record_id: String,
    pub mean_valid: f64,
    pub mean_score: f64,
    pub outcomes: Vec<EvaluatedOutcome>,
}

impl TestResults {
    pub fn new(selected_record_id: String, report: ExecutionReport) -> Self {
        let n = report.outcomes.len() as f64;
        let valid_sum: f64 = report.outcomes.iter().map(|o| o.score.valid as f64).sum();
        TestResults {
            selected_record_id,
            mean_valid: valid_sum / n,
            mean_score: report.score,
            outcomes: report.outcomes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub run_id: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub executions: u32,
    pub branches: u32,
    pub stranded_budget: u32,
    pub selected_record_id: Option<String>,
    pub dev_valid: Option<u8>,
    pub dev_score: Option<f64>,
    pub test_mean_valid: Option<f64>,
    pub test_mean_score: Option<f64>,
    pub ledger: LedgerTotals,
}

/// One convergence row; `best_*` follow the final-selection rule over the records so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub exec_index: usize,
    pub record_id: String,
    pub branch_id: u32,
    pub depth: u32,
    pub v: u8,
    pub f: f64,
    pub best_v: u8,
    pub best_f: f64,
    pub best_any_f: f64,
    /// First record of its branch.
    pub branch_start: bool,
}

impl ConvergenceRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            self.exec_index,
            self.record_id,
            self.branch_id,
            self.depth,
            self.v,
            self.f,
            self.best_v,
            self.best_f,
            self.best_any_f,
            self.branch_start as u8
        )
    }
}

/// Running best-so-far state over records in execution order.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTracker {
    count: usize,
    best: Option<(u8, f64)>,
    best_any: f64,
}

impl ConvergenceTracker {
    pub fn push(&mut self, record: &Record) -> ConvergenceRow {
        self.count += 1;
        // valid first, then score; ties keep the earlier record
        let candidate = (record.valid, record.score);
        self.best = match self.best {
            Some(b) if (candidate.0, candidate.1) > b => Some(candidate),
            Some(b) => Some(b),
            None => Some(candidate),
        };
        self.best_any = self.best_any.max(record.score);
        let (best_v, best_f) = self.best.expect("set above");
        ConvergenceRow {
            exec_index: self.count,
            record_id: record.record_id.clone(),
            branch_id: record.branch_id,
            depth: record.depth,
            v: record.valid,
            f: record.score,
            best_v,
            best_f,
            best_any_f: self.best_any,
            branch_start: record.depth == 1,
        }
    }
}

pub fn convergence_rows<'a>(records: impl IntoIterator<Item = &'a Record>) -> Vec<ConvergenceRow> {
    let mut t = ConvergenceTracker::default();
    records.into_iter().map(|r| t.push(r)).collect()
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact value serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), ArtifactError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes through a temporary file so readers never see a half-written document.
fn replace_file(path: &Path, contents: &str) -> Result<(), ArtifactError> {
    let tmp = path.with_extension("json.tmp");
    write_file(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn lock_holder_alive(lock: &Path) -> bool {
    let Ok(text) = fs::read_to_string(lock) else {
        return false;
    };
    let Ok(pid) = text.trim().parse::<i32>() else {
        return true;
    };
    if pid == std::process::id() as i32 {
        return true;
    }
    // SAFETY: signal 0 performs only the existence and permission check.
    let rc = unsafe { libc::kill(pid, 0) };
    rc == 0 || io::Error::last_os_error().raw_os_error() == Some(libc::EPERM)
}

/// Fails when another live writer holds the directory.
pub fn ensure_unlocked(dir: &Path) -> Result<(), ArtifactError> {
    if lock_holder_alive(&dir.join(LOCK_FILE)) {
        return Err(ArtifactError::Locked(dir.display().to_string()));
    }
    Ok(())
}

/// Owns a run directory for the duration of one synthesis.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    trace: File,
    records: File,
    ledger: File,
    convergence: File,
    tracker: ConvergenceTracker,
    finished: bool,
}

fn append_handle(path: &Path) -> Result<File, ArtifactError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

impl RunWriter {
    /// Takes the lock and writes the run identity, config and datasets.
    pub fn create(
        dir: &Path,
        meta: &RunMeta,
        config: &RunConfig,
        dev: &Dataset,
        test: &Dataset,
    ) -> Result<Self, ArtifactError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock = dir.join(LOCK_FILE);
        if lock.exists() {
            if lock_holder_alive(&lock) {
                return Err(ArtifactError::Locked(dir.display().to_string()));
            }
            fs::remove_file(&lock).map_err(io_err(&lock))?;
        }
        if dir.join("run.json").exists() {
            return Err(ArtifactError::NotEmpty(dir.display().to_string()));
        }
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| match e.kind() {
                io::ErrorKind::AlreadyExists => ArtifactError::Locked(dir.display().to_string()),
                _ => io_err(&lock)(e),
            })?;
        writeln!(f, "{}", std::process::id()).map_err(io_err(&lock))?;

        write_file(&dir.join("run.json"), &pretty_json(meta))?;
        write_file(&dir.join("config.json"), &pretty_json(&config.to_value()))?;
        let datasets = dir.join("datasets");
        fs::create_dir_all(&datasets).map_err(io_err(&datasets))?;
        write_file(&datasets.join("dev.json"), &dev.to_json())?;
        write_file(&datasets.join("test.json"), &test.to_json())?;
        let solvers = dir.join("solvers");
        fs::create_dir_all(&solvers).map_err(io_err(&solvers))?;

        let convergence_path = dir.join("convergence.csv");
        write_file(&convergence_path, CONVERGENCE_HEADER)?;
        Ok(RunWriter {
            trace: append_handle(&dir.join("trace.jsonl"))?,
            records: append_handle(&dir.join("records.jsonl"))?,
            ledger: append_handle(&dir.join("ledger.jsonl"))?,
            convergence: append_handle(&convergence_path)?,
            dir: dir.to_path_buf(),
            tracker: ConvergenceTracker::default(),
            finished: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append_line<T: Serialize>(file: &mut File, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_string(value).map_err(io::Error::other)?;
        line.push('\n');
        file.write_all(line.as_bytes())
    }

    pub fn write_test_results(&self, results: &TestResults) -> Result<(), ArtifactError> {
        replace_file(&self.dir.join("test_results.json"), &pretty_json(results))
    }

    /// Writes `final.json` and releases the lock.
    pub fn finish(mut self, summary: &FinalSummary) -> Result<(), ArtifactError> {
        replace_file(&self.dir.join("final.json"), &pretty_json(summary))?;
        self.release()
    }

    fn release(&mut self) -> Result<(), ArtifactError> {
        if !self.finished {
            self.finished = true;
            let lock = self.dir.join(LOCK_FILE);
            fs::remove_file(&lock).map_err(io_err(&lock))?;
        }
        Ok(())
    }
}

impl Drop for RunWriter {
    fn drop(&mut self) {
        if let Err(e) = self.release() {
            tracing::warn!(error = %e, "could not release run lock");
        }
    }
}

impl SearchObserver for RunWriter {
    fn on_event(&mut self, event: &TraceEvent) -> io::Result<()> {
        Self::append_line(&mut self.trace, event)
    }

    fn on_record(&mut self, record: &Record, source: &str) -> io::Result<()> {
        let solver = self.dir.join(&record.solver_ref);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&solver)?
            .write_all(source.as_bytes())?;
        Self::append_line(&mut self.records, record)?;
        let row = self.tracker.push(record);
        self.convergence.write_all(row.to_csv_line().as_bytes())
    }

    fn on_ledger(&mut self, entries: &[LedgerEntry]) -> io::Result<()> {
        for e in entries {
            Self::append_line(&mut self.ledger, e)?;
        }
        Ok(())
    }

    fn on_global(&mut self, global: &GlobalMemory) -> io::Result<()> {
        replace_file(&self.dir.join("global_memory.json"), &pretty_json(global)).map_err(io::Error::other)
    }
}

/// A run directory read back, complete or partial.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub config: Value,
    pub dev: Dataset,
    pub test: Dataset,
    pub trace: Vec<TraceEvent>,
    pub records: Vec<Record>,
    pub ledger: Vec<LedgerEntry>,
    pub global_memory: GlobalMemory,
    pub test_results: Option<TestResults>,
    pub final_summary: Option<FinalSummary>,
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Option<T>, ArtifactError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&path)(e)),
    };
    serde_json::from_str(&text).map(Some).map_err(|e| ArtifactError::Corrupt {
        file: name.to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Parses a JSON-lines file; an unterminated last line is an interrupted write and is dropped.
fn read_jsonl<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>, ArtifactError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| ArtifactError::Corrupt {
                file: name.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn read_dataset(dir: &Path, name: &str) -> Result<Dataset, ArtifactError> {
    let path = dir.join("datasets").join(name);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ArtifactError::Missing(format!("datasets/{name}")),
        _ => io_err(&path)(e),
    })?;
    Ok(Dataset::from_json(&text)?)
}

impl RunArtifact {
    pub fn load(dir: &Path) -> Result<Self, ArtifactError> {
        if !dir.is_dir() {
            return Err(ArtifactError::Missing(dir.display().to_string()));
        }
        let meta: RunMeta = read_json(dir, "run.json")?.ok_or_else(|| ArtifactError::Missing("run.json".into()))?;
        let config: Value =
            read_json(dir, "config.json")?.ok_or_else(|| ArtifactError::Missing("config.json".into()))?;
        let dev = read_dataset(dir, "dev.json")?;
        let test = read_dataset(dir, "test.json")?;
        let trace: Vec<TraceEvent> = read_jsonl(dir, "trace.jsonl")?;
        let records: Vec<Record> = read_jsonl(dir, "records.jsonl")?;
        let ledger: Vec<LedgerEntry> = read_jsonl(dir, "ledger.jsonl")?;
        let global_memory: GlobalMemory = read_json(dir, "global_memory.json")?.unwrap_or_default();

        let corrupt = |file: &str, line: usize, reason: String| ArtifactError::Corrupt {
            file: file.to_string(),
            line,
            reason,
        };
        for (i, r) in records.iter().enumerate() {
            r.check().map_err(|e| corrupt("records.jsonl", i + 1, e.to_string()))?;
            if !dir.join(&r.solver_ref).is_file() {
                return Err(corrupt("records.jsonl", i + 1, format!("solver {} is missing", r.solver_ref)));
            }
        }
        let mut last_total = None;
        for (i, ev) in trace.iter().enumerate() {
            let (used, left) = ev.counters();
            let total = used + left;
            if last_total.is_some_and(|t| t != total) {
                return Err(corrupt("trace.jsonl", i + 1, "budget counters do not add up".into()));
            }
            last_total = Some(total);
        }
        Ok(RunArtifact {
            dir: dir.to_path_buf(),
            meta,
            config,
            dev,
            test,
            trace,
            records,
            ledger,
            global_memory,
            test_results: read_json(dir, "test_results.json")?,
            final_summary: read_json(dir, "final.json")?,
        })
    }

    pub fn solver_source(&self, record: &Record) -> Result<String, ArtifactError> {
        let path = self.dir.join(&record.solver_ref);
        fs::read_to_string(&path).map_err(io_err(&path))
    }

    /// True when `final.json` is absent or reports an abort.
    pub fn is_partial(&self) -> bool {
        self.final_summary
            .as_ref()
            .is_none_or(|f| f.status != RunStatus::Complete)
    }
}
