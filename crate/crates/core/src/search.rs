//! Budgeted branch search: propose, then repair or improve until the branch
//! stalls, reflect, and finally pick the best record.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::dataset_metrics;
use crate::executor::{execute_solver, ExecOptions, ExecutionReport, ExecutorError, WorkerRuntime};
use crate::memory::{
    final_selection, ArtifactStore, BranchLocalMemory, CriticDiagnostic, GlobalMemory, MemoryError, Record,
};
use crate::operators::{Ablations, Generated, LedgerEntry, MemoryView, OperatorError, Operators, Role};
use crate::problem::Dataset;

/// Minimum gain in best valid score that counts as progress.
pub const IMPROVEMENT_EPSILON: f64 = 0.005;
pub const DEFAULT_IMPROVEMENT_WINDOW: usize = 2;

/// When to end a branch before its depth cap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop once the best valid score stops improving.
    #[default]
    Stagnation,
    /// Only the depth cap and the budget end a branch.
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Executions available to the whole run.
    pub budget: u32,
    /// Maximum records per branch, the proposal included.
    pub depth_cap: u32,
    /// Per-instance time limit in seconds.
    pub timeout_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub ablations: Ablations,
    #[serde(default = "default_window")]
    pub improvement_window: usize,
    #[serde(default)]
    pub stop_rule: StopRule,
    /// Concurrent instance workers; defaults to the available cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

fn default_window() -> usize {
    DEFAULT_IMPROVEMENT_WINDOW
}

impl SearchConfig {
    pub fn new(budget: u32, depth_cap: u32, timeout_s: f64) -> Self {
        SearchConfig {
            budget,
            depth_cap,
            timeout_s,
            rng_seed: 0,
            ablations: Ablations::default(),
            improvement_window: DEFAULT_IMPROVEMENT_WINDOW,
            stop_rule: StopRule::Stagnation,
            parallelism: None,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.budget < 1 {
            return bad("budget must be at least 1");
        }
        if self.depth_cap < 1 {
            return bad("depth_cap must be at least 1");
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if self.improvement_window < 1 {
            return bad("improvement_window must be at least 1");
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1");
        }
        if self.ablations.no_branch_local && self.ablations.flat_memory {
            return bad("no_branch_local and flat_memory are mutually exclusive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("budget {0} opens no branch; at least 2 executions are needed")]
    EmptySearch(u32),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("could not persist run state: {0}")]
    Persist(#[from] std::io::Error),
    #[error("run_count must be at least 2, got {0}")]
    TooFewRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloseReason {
    DepthCap,
    BudgetExhausted,
    NoImprovementExpected,
}

/// Trace events; each carries the budget counters at the time it was emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    BranchOpened {
        branch_id: u32,
        executions: u32,
        remaining_budget: u32,
    },
    Executed {
        record_id: String,
        branch_id: u32,
        depth: u32,
        mode: Role,
        parent_record_id: Option<String>,
        /// Whether the branch had a valid record before this execution.
        branch_had_valid: bool,
        valid: u8,
        score: f64,
        executions: u32,
        remaining_budget: u32,
    },
    BranchClosed {
        branch_id: u32,
        reason: CloseReason,
        records: usize,
        executions: u32,
        remaining_budget: u32,
    },
    Reflected {
        branch_id: u32,
        token_estimate: usize,
        executions: u32,
        remaining_budget: u32,
    },
    Finished {
        selected_record_id: Option<String>,
        stranded_budget: u32,
        executions: u32,
        remaining_budget: u32,
    },
    Aborted {
        error: String,
        executions: u32,
        remaining_budget: u32,
    },
}

impl TraceEvent {
    pub fn counters(&self) -> (u32, u32) {
        match self {
            TraceEvent::BranchOpened { executions, remaining_budget, .. }
            | TraceEvent::Executed { executions, remaining_budget, .. }
            | TraceEvent::BranchClosed { executions, remaining_budget, .. }
            | TraceEvent::Reflected { executions, remaining_budget, .. }
            | TraceEvent::Finished { executions, remaining_budget, .. }
            | TraceEvent::Aborted { executions, remaining_budget, .. } => (*executions, *remaining_budget),
        }
    }
}

/// Receives run state as it is produced, for incremental persistence.
pub trait SearchObserver {
    fn on_event(&mut self, _event: &TraceEvent) -> std::io::Result<()> {
        Ok(())
    }
    fn on_record(&mut self, _record: &Record, _source: &str) -> std::io::Result<()> {
        Ok(())
    }
    fn on_ledger(&mut self, _entries: &[LedgerEntry]) -> std::io::Result<()> {
        Ok(())
    }
    fn on_global(&mut self, _global: &GlobalMemory) -> std::io::Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl SearchObserver for NoObserver {}

#[derive(Debug, Clone, Default)]
pub struct SearchState {
    pub remaining_budget: u32,
    pub executions: u32,
    pub branch_counter: u32,
    pub global_memory: GlobalMemory,
    pub branch_memories: Vec<BranchLocalMemory>,
    pub artifact_store: ArtifactStore,
    pub trace: Vec<TraceEvent>,
    pub stranded_budget: u32,
}

impl SearchState {
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.branch_memories.iter().flat_map(|b| b.records().iter())
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub record: Record,
    pub source: String,
}

/// State is returned even when the run aborts.
pub struct SearchRun {
    pub state: SearchState,
    pub ledger: Vec<LedgerEntry>,
    pub outcome: Result<Selection, SearchError>,
}

/// Dev data and the worker runtime shared by every execution of a run.
pub struct SearchInputs<'a> {
    pub task_description: &'a str,
    pub dev: &'a Dataset,
    pub runtime: &'a dyn WorkerRuntime,
    /// Grace, log cap and crash policy; timeout and parallelism come from the config.
    pub exec: ExecOptions,
}

/// False once the branch has a valid record and its best valid score has not
/// risen by more than [`IMPROVEMENT_EPSILON`] over the last `window` records.
pub fn improvement_expected(branch: &BranchLocalMemory, window: usize) -> bool {
    let records = branch.records();
    if !branch.has_valid() {
        return true;
    }
    let split = records.len().saturating_sub(window);
    let best = |rs: &[Record]| rs.iter().filter(|r| r.is_valid()).map(|r| r.score).reduce(f64::max);
    match (best(&records[..split]), best(&records[split..])) {
        (Some(before), Some(recent)) => recent - before > IMPROVEMENT_EPSILON,
        (None, _) => true,
        (Some(_), None) => false,
    }
}

/// Borrows the memory fields only, leaving the operators free for `&mut` use.
macro_rules! view {
    ($run:ident) => {
        MemoryView {
            task_description: $run.inputs.task_description,
            branches: &$run.state.branch_memories,
            global: &$run.state.global_memory,
            ablations: $run.config.ablations,
        }
    };
}

struct Run<'a, 'o> {
    inputs: &'a SearchInputs<'a>,
    config: &'a SearchConfig,
    exec: ExecOptions,
    ops: &'a mut Operators,
    observer: &'o mut dyn SearchObserver,
    state: SearchState,
    ledger_flushed: usize,
    rng: ChaCha8Rng,
}

impl Run<'_, '_> {
    fn emit(&mut self, event: TraceEvent) -> Result<(), SearchError> {
        self.observer.on_event(&event)?;
        self.state.trace.push(event);
        Ok(())
    }

    fn flush_ledger(&mut self) -> Result<(), SearchError> {
        let entries = &self.ops.ledger().entries()[self.ledger_flushed..];
        if !entries.is_empty() {
            self.observer.on_ledger(entries)?;
            self.ledger_flushed += entries.len();
        }
        Ok(())
    }

    fn execute(&mut self, source: &str) -> Result<ExecutionReport, SearchError> {
        let report = execute_solver(self.inputs.runtime, source, self.inputs.dev, &self.exec)?;
        self.state.remaining_budget -= 1;
        self.state.executions += 1;
        Ok(report)
    }

    fn current_branch(&self) -> &BranchLocalMemory {
        self.state.branch_memories.last().expect("a branch is open")
    }

    /// Executes, critiques and records one generated solver.
    fn step(&mut self, mode: Role, generated: Generated, parent: Option<(Record, String)>) -> Result<(), SearchError> {
        let had_valid = self.current_branch().has_valid();
        let report = self.execute(&generated.source)?;
        let diagnostic: CriticDiagnostic = self.ops.critic(
            &generated.source,
            &report,
            parent.as_ref().map(|(r, code)| (code.as_str(), r)),
        )?;
        self.flush_ledger()?;
        let branch = self.current_branch();
        let branch_id = branch.branch_id;
        let depth = branch.records().len() as u32 + 1;
        let record_id = format!("r{:04}", self.state.executions);
        let solver_ref = self.state.artifact_store.put(&record_id, &generated.source)?;
        let record = Record::new(
            record_id.clone(),
            branch_id,
            depth,
            generated.sketch,
            diagnostic,
            report,
            parent.map(|(r, _)| r.record_id),
            solver_ref,
        );
        self.observer.on_record(&record, &generated.source)?;
        let event = TraceEvent::Executed {
            record_id,
            branch_id,
            depth,
            mode,
            parent_record_id: record.parent_record_id.clone(),
            branch_had_valid: had_valid,
            valid: record.valid,
            score: record.score,
            executions: self.state.executions,
            remaining_budget: self.state.remaining_budget,
        };
        self.state
            .branch_memories
            .last_mut()
            .expect("a branch is open")
            .append_record(record)?;
        self.emit(event)
    }

    fn run_branch(&mut self) -> Result<(), SearchError> {
        self.state.branch_counter += 1;
        let branch_id = self.state.branch_counter;
        self.state.branch_memories.push(BranchLocalMemory::new(branch_id));
        self.emit(TraceEvent::BranchOpened {
            branch_id,
            executions: self.state.executions,
            remaining_budget: self.state.remaining_budget,
        })?;

        let view = view!(self);
        let generated = self.ops.propose(&view);
        self.flush_ledger()?;
        self.step(Role::Propose, generated?, None)?;

        let mut reason = CloseReason::DepthCap;
        for _depth in 2..=self.config.depth_cap {
            if self.state.remaining_budget == 0 {
                reason = CloseReason::BudgetExhausted;
                break;
            }
            let branch = self.state.branch_memories.last().expect("a branch is open");
            if self.config.stop_rule == StopRule::Stagnation
                && !improvement_expected(branch, self.config.improvement_window)
            {
                reason = CloseReason::NoImprovementExpected;
                break;
            }
            let (mode, parent) = if branch.has_valid() {
                (Role::Improve, branch.select_improve_parent()?.clone())
            } else {
                (Role::Repair, branch.select_repair_parent(&mut self.rng)?.clone())
            };
            let parent_code = self.state.artifact_store.get(&parent.solver_ref)?.to_string();
            let view = view!(self);
            let branch = self.state.branch_memories.last().expect("a branch is open");
            let generated = match mode {
                Role::Repair => self.ops.repair(&view, branch, &parent, &parent_code),
                _ => self.ops.improve(&view, branch, &parent, &parent_code),
            };
            self.flush_ledger()?;
            self.step(mode, generated?, Some((parent, parent_code)))?;
        }
        self.emit(TraceEvent::BranchClosed {
            branch_id,
            reason,
            records: self.current_branch().records().len(),
            executions: self.state.executions,
            remaining_budget: self.state.remaining_budget,
        })?;

        if !self.config.ablations.no_global {
            let view = view!(self);
            let branch = self.state.branch_memories.last().expect("a branch is open");
            let entry = self.ops.reflect(&view, branch);
            self.flush_ledger()?;
            let entry = entry?;
            let token_estimate = entry.token_estimate;
            self.state.global_memory.add_entry(entry)?;
            self.observer.on_global(&self.state.global_memory)?;
            self.emit(TraceEvent::Reflected {
                branch_id,
                token_estimate,
                executions: self.state.executions,
                remaining_budget: self.state.remaining_budget,
            })?;
        }
        Ok(())
    }

    fn run(&mut self) -> Result<Selection, SearchError> {
        while self.state.remaining_budget >= 2 {
            self.run_branch()?;
        }
        self.state.stranded_budget = self.state.remaining_budget;
        let selected = final_selection(&self.state.branch_memories).ok().cloned();
        self.emit(TraceEvent::Finished {
            selected_record_id: selected.as_ref().map(|r| r.record_id.clone()),
            stranded_budget: self.state.stranded_budget,
            executions: self.state.executions,
            remaining_budget: self.state.remaining_budget,
        })?;
        let record = selected.ok_or(SearchError::EmptySearch(self.config.budget))?;
        let source = self.state.artifact_store.get(&record.solver_ref)?.to_string();
        Ok(Selection { record, source })
    }
}

/// Runs the whole search on the dev set.
pub fn run_search(
    inputs: &SearchInputs<'_>,
    config: &SearchConfig,
    ops: &mut Operators,
    observer: &mut dyn SearchObserver,
) -> SearchRun {
    let fail = |e: SearchError| SearchRun {
        state: SearchState::default(),
        ledger: Vec::new(),
        outcome: Err(e),
    };
    if let Err(e) = config.validate() {
        return fail(e);
    }
    if inputs.dev.is_empty() {
        return fail(SearchError::Executor(ExecutorError::EmptyDataset));
    }
    let mut exec = inputs.exec.clone();
    exec.timeout_s = config.timeout_s;
    exec.parallelism = config.parallelism;
    let mut run = Run {
        inputs,
        config,
        exec,
        ops,
        observer,
        state: SearchState {
            remaining_budget: config.budget,
            ..SearchState::default()
        },
        ledger_flushed: 0,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
    };
    let mut outcome = run.run();
    if let Err(e) = &outcome {
        if !matches!(e, SearchError::EmptySearch(_)) {
            let event = TraceEvent::Aborted {
                error: e.to_string(),
                executions: run.state.executions,
                remaining_budget: run.state.remaining_budget,
            };
            if let Err(persist) = run.emit(event) {
                tracing::error!(error = %persist, "could not record the abort");
            }
        }
    }
    if let (Ok(_), Err(e)) = (&outcome, run.flush_ledger()) {
        outcome = Err(e);
    }
    SearchRun {
        ledger: run.ops.ledger().entries().to_vec(),
        state: run.state,
        outcome,
    }
}

/// Mean and population standard deviation, computed on values shifted by the
/// first one so identical inputs give exactly that value and zero.
pub fn mean_and_population_stdev(values: &[f64]) -> Option<(f64, f64)> {
    let (&first, _) = values.split_first()?;
    let n = values.len() as f64;
    let d: Vec<f64> = values.iter().map(|v| v - first).collect();
    let mean_d = d.iter().sum::<f64>() / n;
    let var = (d.iter().map(|x| x * x).sum::<f64>() / n - mean_d * mean_d).max(0.0);
    Some((first + mean_d, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_index: usize,
    pub rng_seed: u64,
    pub selected_record_id: String,
    pub dev_score: f64,
    pub test_mean_score: f64,
    pub test_mean_valid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub runs: Vec<RunMetrics>,
    pub mean_score: f64,
    pub stdev_score: f64,
    pub mean_valid: f64,
    pub stdev_valid: f64,
}

/// Runs the search `run_count` times with seeds `rng_seed + i` and summarizes
/// the selected solvers' test metrics. `make_ops` builds fresh operators per run.
pub fn run_multi(
    inputs: &SearchInputs<'_>,
    test: &Dataset,
    config: &SearchConfig,
    run_count: usize,
    mut make_ops: impl FnMut(usize) -> Result<Operators, SearchError>,
) -> Result<StabilitySummary, SearchError> {
    if run_count < 2 {
        return Err(SearchError::TooFewRuns(run_count));
    }
    let mut runs = Vec::with_capacity(run_count);
    for i in 0..run_count {
        let mut cfg = config.clone();
        cfg.rng_seed = config.rng_seed.wrapping_add(i as u64);
        let mut ops = make_ops(i)?;
        let run = run_search(inputs, &cfg, &mut ops, &mut NoObserver);
        let selection = run.outcome?;
        let test_report = evaluate_on(inputs, test, &cfg, &selection.source)?;
        let metrics = dataset_metrics(&test_report.per_instance_scores()).map_err(|_| ExecutorError::EmptyDataset)?;
        runs.push(RunMetrics {
            run_index: i,
            rng_seed: cfg.rng_seed,
            selected_record_id: selection.record.record_id,
            dev_score: selection.record.score,
            test_mean_score: metrics.mean_score,
            test_mean_valid: metrics.mean_valid,
        });
    }
    let scores: Vec<f64> = runs.iter().map(|r| r.test_mean_score).collect();
    let valids: Vec<f64> = runs.iter().map(|r| r.test_mean_valid).collect();
    let (mean_score, stdev_score) = mean_and_population_stdev(&scores).expect("at least two runs");
    let (mean_valid, stdev_valid) = mean_and_population_stdev(&valids).expect("at least two runs");
    Ok(StabilitySummary {
        runs,
        mean_score,
        stdev_score,
        mean_valid,
        stdev_valid,
    })
}

/// One evaluation of a solver on another split, outside the search budget.
pub fn evaluate_on(
    inputs: &SearchInputs<'_>,
    dataset: &Dataset,
    config: &SearchConfig,
    source: &str,
) -> Result<ExecutionReport, ExecutorError> {
    let mut exec = inputs.exec.clone();
    exec.timeout_s = config.timeout_s;
    exec.parallelism = config.parallelism;
    execute_solver(inputs.runtime, source, dataset, &exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::tests::record;

    fn branch(scores: &[(f64, bool)]) -> BranchLocalMemory {
        let mut b = BranchLocalMemory::new(1);
        for (i, (s, v)) in scores.iter().enumerate() {
            let parent = (i > 0).then(|| format!("r{i}"));
            b.append_record(record(&format!("r{}", i + 1), 1, i as u32 + 1, *s, *v, parent.as_deref()))
                .unwrap();
        }
        b
    }

    #[test]
    fn stagnation_rule_examples() {
        assert!(!improvement_expected(&branch(&[(0.5, true), (0.5, true), (0.5, true)]), 2));
        assert!(improvement_expected(&branch(&[(0.0, false), (0.0, false)]), 2));
        assert!(improvement_expected(&branch(&[(0.4, true), (0.6, true)]), 2));
        assert!(improvement_expected(&branch(&[(0.5, true), (0.6, true), (0.6, true)]), 2));
        assert!(!improvement_expected(&branch(&[(0.5, true), (0.6, true), (0.6, true), (0.6, true)]), 2));
        assert!(!improvement_expected(&branch(&[(0.5, true), (0.504, true), (0.5, true)]), 2));
        assert!(!improvement_expected(&branch(&[(0.5, true), (0.2, false), (0.3, false)]), 2));
        assert!(improvement_expected(&branch(&[(0.1, false), (0.2, false), (0.3, true)]), 2));
    }

    #[test]
    fn stdev_examples() {
        let (m, s) = mean_and_population_stdev(&[0.6, 0.8]).unwrap();
        assert!((m - 0.7).abs() < 1e-12 && (s - 0.1).abs() < 1e-12);
        assert_eq!(mean_and_population_stdev(&[0.1, 0.1, 0.1]), Some((0.1, 0.0)));
        assert_eq!(mean_and_population_stdev(&[]), None);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::new(16, 5, 1.0).validate().is_ok());
        assert!(SearchConfig::new(0, 5, 1.0).validate().is_err());
        assert!(SearchConfig::new(4, 0, 1.0).validate().is_err());
        let mut c = SearchConfig::new(4, 2, 1.0);
        c.ablations.no_branch_local = true;
        c.ablations.flat_memory = true;
        assert!(c.validate().is_err());
    }
}
