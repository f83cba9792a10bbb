//! The five model-backed operators, their role bindings and the token ledger.

mod client;
pub mod parse;
pub mod prompt;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use client::{ChatModelClient, ChatReply, ClientError, OpenAiClient, OpenAiConfig, ScriptedClient};
pub use prompt::{TemplateId, Templates};

use crate::executor::{EvaluatedOutcome, ExecutionReport, Status};
use crate::memory::{
    estimate_tokens, final_selection, BranchLocalMemory, CriticDiagnostic, GlobalMemory, GlobalMemoryEntry, MemoryError,
    Record,
};
use parse::{extract_code, extract_sketch, first_json_object, forbidden_imports, strip_fences};
use prompt::{
    render_execution_output, render_flat_memory, render_global_memory, render_history, EMPTY_GLOBAL_MEMORY,
    NO_PREVIOUS_CODE, NO_PREVIOUS_LOGS,
};

/// Extra asks after an unusable reply.
pub const PARSE_REASKS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Propose,
    Repair,
    Improve,
    Critic,
    Reflect,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Propose, Role::Repair, Role::Improve, Role::Critic, Role::Reflect];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Propose => "propose",
            Role::Repair => "repair",
            Role::Improve => "improve",
            Role::Critic => "critic",
            Role::Reflect => "reflect",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Memory ablation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    /// Skip reflection; proposals see no cross-branch lessons.
    pub no_global: bool,
    /// Refinement prompts show only the parent, not the branch history.
    pub no_branch_local: bool,
    /// Refinement prompts omit invalid records.
    pub no_failed_nodes: bool,
    /// One shared list of every record and summary replaces both memory levels.
    pub flat_memory: bool,
}

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("template placeholder {{{0}}} is unbound")]
    UnboundPlaceholder(String),
    #[error("{role} call failed: {source}")]
    Client {
        role: Role,
        #[source]
        source: ClientError,
    },
    #[error("{role} reply unusable after {attempts} attempts: {reason}")]
    ParseFailure { role: Role, attempts: u32, reason: String },
    #[error("no client bound for role {0}")]
    Unbound(Role),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// A client for each role; roles may share a client.
#[derive(Clone)]
pub struct RoleMap {
    clients: BTreeMap<Role, Arc<dyn ChatModelClient>>,
}

impl std::fmt::Debug for RoleMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (role, c) in &self.clients {
            m.entry(role, &c.model_name());
        }
        m.finish()
    }
}

impl RoleMap {
    pub fn new(clients: BTreeMap<Role, Arc<dyn ChatModelClient>>) -> Result<Self, OperatorError> {
        for role in Role::ALL {
            if !clients.contains_key(&role) {
                return Err(OperatorError::Unbound(role));
            }
        }
        Ok(RoleMap { clients })
    }

    /// Binds every role to one client.
    pub fn uniform(client: Arc<dyn ChatModelClient>) -> Self {
        RoleMap {
            clients: Role::ALL.iter().map(|r| (*r, client.clone())).collect(),
        }
    }

    /// Generation roles share `generator`; critic and reflect share `reviewer`.
    pub fn split(generator: Arc<dyn ChatModelClient>, reviewer: Arc<dyn ChatModelClient>) -> Self {
        let mut clients: BTreeMap<Role, Arc<dyn ChatModelClient>> = BTreeMap::new();
        for r in [Role::Propose, Role::Repair, Role::Improve] {
            clients.insert(r, generator.clone());
        }
        for r in [Role::Critic, Role::Reflect] {
            clients.insert(r, reviewer.clone());
        }
        RoleMap { clients }
    }

    pub fn get(&self, role: Role) -> &Arc<dyn ChatModelClient> {
        &self.clients[&role]
    }
}

/// Price per token for one model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rate {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub role: Role,
    pub model_name: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_time: f64,
    pub cost: f64,
    /// Token counts are whitespace estimates because the provider sent no usage.
    pub approximate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_time: f64,
    pub cost: f64,
}

impl LedgerTotals {
    pub fn add(&mut self, e: &LedgerEntry) {
        self.calls += 1;
        self.input_tokens += e.input_tokens;
        self.output_tokens += e.output_tokens;
        self.wall_time += e.wall_time;
        self.cost += e.cost;
    }

    pub fn of<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry>) -> Self {
        let mut t = LedgerTotals::default();
        for e in entries {
            t.add(e);
        }
        t
    }
}

/// Append-only record of model calls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenLedger {
    entries: Vec<LedgerEntry>,
}

impl TokenLedger {
    pub fn append(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn totals(&self) -> LedgerTotals {
        LedgerTotals::of(&self.entries)
    }

    pub fn totals_by_role(&self) -> BTreeMap<Role, LedgerTotals> {
        let mut by: BTreeMap<Role, LedgerTotals> = BTreeMap::new();
        for e in &self.entries {
            by.entry(e.role).or_default().add(e);
        }
        by
    }
}

/// A generated solver and its design sketch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub source: String,
    pub sketch: String,
}

/// The memory a prompt may draw on.
#[derive(Debug, Clone, Copy)]
pub struct MemoryView<'a> {
    pub task_description: &'a str,
    /// All branches so far, including the open one.
    pub branches: &'a [BranchLocalMemory],
    pub global: &'a GlobalMemory,
    pub ablations: Ablations,
}

impl MemoryView<'_> {
    fn proposer_memory(&self) -> String {
        if self.ablations.flat_memory {
            render_flat_memory(self.branches, self.global)
        } else if self.ablations.no_global {
            EMPTY_GLOBAL_MEMORY.to_string()
        } else {
            render_global_memory(self.global)
        }
    }

    fn refinement_memory(&self, branch: &BranchLocalMemory, parent: &Record) -> String {
        let a = self.ablations;
        if a.flat_memory {
            render_flat_memory(self.branches, self.global)
        } else if a.no_branch_local {
            render_history(branch, [parent])
        } else if a.no_failed_nodes {
            render_history(branch, branch.records().iter().filter(|r| r.is_valid()))
        } else {
            render_history(branch, branch.records())
        }
    }
}

/// True when every failing instance merely ran out of time.
fn timeout_only(outcomes: &[EvaluatedOutcome]) -> bool {
    let mut failing = outcomes.iter().filter(|o| !o.is_valid()).peekable();
    failing.peek().is_some() && failing.all(|o| o.outcome.status == Status::TimeoutNoYield)
}

fn first_failure(outcomes: &[EvaluatedOutcome]) -> Option<String> {
    outcomes.iter().find(|o| !o.is_valid()).map(|o| {
        let e = &o.outcome;
        match o.evaluation.as_ref().and_then(|ev| ev.violation()) {
            Some(v) => format!("instance {} violated {}: {}", e.instance_id, v.constraint, v.detail),
            None => format!("instance {} ended {}", e.instance_id, e.status.as_str()),
        }
    })
}

/// Diagnostic derived from the execution report alone.
pub fn fallback_diagnostic(report: &ExecutionReport) -> CriticDiagnostic {
    let ok = report.outcomes.iter().filter(|o| o.is_valid()).count();
    let is_bug = report
        .outcomes
        .iter()
        .any(|o| !o.is_valid() && o.outcome.status != Status::TimeoutNoYield);
    let mut summary = format!(
        "Valid on {ok} of {} instances with mean score {:.4}.",
        report.outcomes.len(),
        report.score
    );
    if let Some(f) = first_failure(&report.outcomes) {
        summary.push_str(&format!(" First failure: {f}."));
    }
    CriticDiagnostic {
        is_bug,
        summary,
        fallback: true,
    }
}

/// Most frequent failure name across a branch: a violated constraint or a worker status.
fn most_frequent_failure(branch: &BranchLocalMemory) -> Option<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in branch.records() {
        for o in &r.outcomes {
            if o.is_valid() {
                continue;
            }
            let name = match o.evaluation.as_ref().and_then(|e| e.violation()) {
                Some(v) => v.constraint.as_str().to_string(),
                None => o.outcome.status.as_str().to_string(),
            };
            *counts.entry(name).or_default() += 1;
        }
    }
    let max = *counts.values().max()?;
    counts.into_iter().find(|(_, c)| *c == max)
}

/// Global entry assembled from the branch's best sketch and commonest failure.
pub fn fallback_reflection(branch: &BranchLocalMemory) -> Result<GlobalMemoryEntry, MemoryError> {
    let best = final_selection(std::slice::from_ref(branch))?;
    let mut design = strip_fences(&best.sketch);
    if design.is_empty() {
        design = format!("Design of record {} (no sketch given)", best.record_id);
    }
    let (failures, avoid) = match most_frequent_failure(branch) {
        Some((name, n)) => (
            format!(
                "Most frequent failure was {name} ({n} instance runs); best mean score {:.4}.",
                best.score
            ),
            format!("Rule out {name} failures before yielding any solution."),
        ),
        None => (
            format!("No failures; the score stagnated at {:.4}.", best.score),
            "Do not revisit this design without a substantially different core idea.".to_string(),
        ),
    };
    GlobalMemoryEntry::new(branch.branch_id, design, failures, avoid)
}

fn text_field(obj: &Value, keys: &[&str]) -> Option<String> {
    let v = keys.iter().find_map(|k| obj.get(*k))?;
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items
            .iter()
            .map(|i| i.as_str().map(str::to_string).unwrap_or_else(|| i.to_string()))
            .collect::<Vec<_>>()
            .join("; "),
        _ => return None,
    };
    let s = strip_fences(&s);
    (!s.is_empty()).then_some(s)
}

fn parse_critic(text: &str) -> Result<CriticDiagnostic, String> {
    let obj = first_json_object(text).ok_or("no JSON object found")?;
    let is_bug = obj
        .get("is_bug")
        .and_then(Value::as_bool)
        .ok_or("`is_bug` must be a boolean")?;
    let summary = obj
        .get("summary")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or("`summary` must be a non-empty string")?;
    Ok(CriticDiagnostic {
        is_bug,
        summary: summary.to_string(),
        fallback: false,
    })
}

fn parse_reflection(text: &str) -> Result<[String; 3], String> {
    let obj = first_json_object(text).ok_or("no JSON object found")?;
    let design = text_field(&obj, &["algorithmic design", "algorithmic_design"])
        .ok_or("missing `algorithmic design`")?;
    let failure = text_field(&obj, &["failure and stagnation reason", "failure_and_stagnation_reason"])
        .ok_or("missing `failure and stagnation reason`")?;
    let constraint = text_field(&obj, &["constraint"]).ok_or("missing `constraint`")?;
    Ok([design, failure, constraint])
}

fn parse_generation(text: &str) -> Result<Generated, String> {
    let code = extract_code(text).ok_or("no fenced code block")?;
    if code.trim().is_empty() {
        return Err("the code block is empty".into());
    }
    let banned = forbidden_imports(code);
    if !banned.is_empty() {
        return Err(format!("imports forbidden solver libraries: {}", banned.join(", ")));
    }
    let sketch = extract_sketch(text);
    Ok(Generated {
        source: code.to_string(),
        sketch: if sketch.is_empty() {
            "(no sketch given)".to_string()
        } else {
            sketch.to_string()
        },
    })
}

/// Renders prompts, calls the bound clients, parses replies and books every call.
pub struct Operators {
    roles: RoleMap,
    templates: Templates,
    rates: BTreeMap<String, Rate>,
    ledger: TokenLedger,
}

impl Operators {
    pub fn new(roles: RoleMap, templates: Templates, rates: BTreeMap<String, Rate>) -> Self {
        Operators {
            roles,
            templates,
            rates,
            ledger: TokenLedger::default(),
        }
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn roles(&self) -> &RoleMap {
        &self.roles
    }

    fn call(&mut self, role: Role, prompt: &str) -> Result<String, OperatorError> {
        let client = self.roles.get(role).clone();
        let reply = client
            .complete(prompt)
            .map_err(|source| OperatorError::Client { role, source })?;
        let approximate = reply.input_tokens.is_none() || reply.output_tokens.is_none();
        let input_tokens = reply.input_tokens.unwrap_or_else(|| estimate_tokens(prompt) as u64);
        let output_tokens = reply.output_tokens.unwrap_or_else(|| estimate_tokens(&reply.text) as u64);
        let model_name = client.model_name().to_string();
        let rate = self.rates.get(&model_name).copied().unwrap_or_default();
        self.ledger.append(LedgerEntry {
            role,
            cost: input_tokens as f64 * rate.input + output_tokens as f64 * rate.output,
            model_name,
            input_tokens,
            output_tokens,
            wall_time: reply.elapsed_s,
            approximate,
        });
        Ok(reply.text)
    }

    /// Calls `role` until `parse` accepts the reply or the re-asks run out.
    fn ask<T>(
        &mut self,
        role: Role,
        prompt: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Result<T, String>, OperatorError> {
        let mut current = prompt.to_string();
        let mut reason = String::new();
        for _ in 0..=PARSE_REASKS {
            let text = self.call(role, &current)?;
            match parse(&text) {
                Ok(v) => return Ok(Ok(v)),
                Err(r) => {
                    tracing::debug!(%role, reason = %r, "unusable reply");
                    reason = r;
                    current = format!(
                        "{prompt}\n\nYour previous reply could not be used: {reason}. Answer again in exactly the requested format."
                    );
                }
            }
        }
        Ok(Err(reason))
    }

    fn generate(&mut self, role: Role, prompt: &str) -> Result<Generated, OperatorError> {
        self.ask(role, prompt, parse_generation)?
            .map_err(|reason| OperatorError::ParseFailure {
                role,
                attempts: PARSE_REASKS + 1,
                reason,
            })
    }

    pub fn render_propose(&self, view: &MemoryView<'_>) -> Result<String, OperatorError> {
        let memory = view.proposer_memory();
        self.templates.render(
            TemplateId::Proposer,
            &[("task_description", view.task_description), ("global_memory", &memory)],
        )
    }

    /// Opens a branch with a new design.
    pub fn propose(&mut self, view: &MemoryView<'_>) -> Result<Generated, OperatorError> {
        let prompt = self.render_propose(view)?;
        self.generate(Role::Propose, &prompt)
    }

    pub fn render_refinement(
        &self,
        role: Role,
        view: &MemoryView<'_>,
        branch: &BranchLocalMemory,
        parent: &Record,
        parent_code: &str,
    ) -> Result<String, OperatorError> {
        let template = if role == Role::Repair {
            TemplateId::Debug
        } else {
            TemplateId::Improve
        };
        let memory = view.refinement_memory(branch, parent);
        let output = render_execution_output(parent.valid, parent.score, &parent.outcomes);
        self.templates.render(
            template,
            &[
                ("task_description", view.task_description),
                ("previous_code", parent_code),
                ("execution_output", &output),
                ("branch_memory", &memory),
            ],
        )
    }

    /// Fixes an invalid parent.
    pub fn repair(
        &mut self,
        view: &MemoryView<'_>,
        branch: &BranchLocalMemory,
        parent: &Record,
        parent_code: &str,
    ) -> Result<Generated, OperatorError> {
        let prompt = self.render_refinement(Role::Repair, view, branch, parent, parent_code)?;
        self.generate(Role::Repair, &prompt)
    }

    /// Applies one focused change to a valid parent.
    pub fn improve(
        &mut self,
        view: &MemoryView<'_>,
        branch: &BranchLocalMemory,
        parent: &Record,
        parent_code: &str,
    ) -> Result<Generated, OperatorError> {
        let prompt = self.render_refinement(Role::Improve, view, branch, parent, parent_code)?;
        self.generate(Role::Improve, &prompt)
    }

    /// Diagnoses the current execution against its parent's.
    pub fn critic(
        &mut self,
        current_code: &str,
        current: &ExecutionReport,
        parent: Option<(&str, &Record)>,
    ) -> Result<CriticDiagnostic, OperatorError> {
        let current_logs = render_execution_output(current.valid, current.score, &current.outcomes);
        let (parent_code, parent_logs) = match parent {
            Some((code, rec)) => (code.to_string(), render_execution_output(rec.valid, rec.score, &rec.outcomes)),
            None => (NO_PREVIOUS_CODE.to_string(), NO_PREVIOUS_LOGS.to_string()),
        };
        let prompt = self.templates.render(
            TemplateId::Critic,
            &[
                ("parent_code", &parent_code),
                ("previous_logs", &parent_logs),
                ("current_code", current_code),
                ("current_logs", &current_logs),
            ],
        )?;
        let mut diag = match self.ask(Role::Critic, &prompt, parse_critic)? {
            Ok(d) => d,
            Err(_) => fallback_diagnostic(current),
        };
        if diag.is_bug && timeout_only(&current.outcomes) {
            diag.is_bug = false;
        }
        Ok(diag)
    }

    pub fn render_reflect(&self, view: &MemoryView<'_>, branch: &BranchLocalMemory) -> Result<String, OperatorError> {
        let history = render_history(branch, branch.records());
        self.templates.render(
            TemplateId::Reflection,
            &[("task_description", view.task_description), ("trajectory_history", &history)],
        )
    }

    /// Summarizes a finished branch into a global memory entry.
    pub fn reflect(
        &mut self,
        view: &MemoryView<'_>,
        branch: &BranchLocalMemory,
    ) -> Result<GlobalMemoryEntry, OperatorError> {
        if branch.is_empty() {
            return Err(MemoryError::Empty.into());
        }
        let prompt = self.render_reflect(view, branch)?;
        match self.ask(Role::Reflect, &prompt, parse_reflection)? {
            Ok([design, failures, constraint]) => {
                Ok(GlobalMemoryEntry::new(branch.branch_id, design, failures, constraint)?)
            }
            Err(_) => Ok(fallback_reflection(branch)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{Constraint, InstanceScore, RawOutcome};
    use crate::executor::ExecutionOutcome;
    use crate::memory::ArtifactStore;

    fn eo(id: &str, status: Status, eval: Option<RawOutcome>, score: f64) -> EvaluatedOutcome {
        let valid = status == Status::Solved && eval.as_ref().is_some_and(RawOutcome::is_feasible);
        EvaluatedOutcome {
            outcome: ExecutionOutcome {
                instance_id: id.into(),
                status,
                last_solution: None,
                yield_count: (status == Status::Solved) as u32,
                stdout_log: format!("STDOUT-{id}"),
                stderr_log: format!("STDERR-{id}"),
                wall_time: 0.5,
            },
            evaluation: eval,
            score: InstanceScore {
                valid: valid as u8,
                score: if valid { score } else { 0.0 },
            },
        }
    }

    fn overlap(id: &str) -> EvaluatedOutcome {
        eo(
            id,
            Status::Solved,
            Some(RawOutcome::infeasible(Constraint::Overlap, vec![1, 2], "boxes 1 and 2 intersect")),
            0.0,
        )
    }

    fn good(id: &str, score: f64) -> EvaluatedOutcome {
        eo(id, Status::Solved, Some(RawOutcome::feasible(1.0)), score)
    }

    fn rec(id: &str, depth: u32, parent: Option<&str>, outcomes: Vec<EvaluatedOutcome>) -> Record {
        Record::new(
            id.into(),
            1,
            depth,
            format!("sketch-{id}"),
            CriticDiagnostic {
                is_bug: false,
                summary: format!("diag-{id}"),
                fallback: false,
            },
            ExecutionReport::from_outcomes(outcomes).unwrap(),
            parent.map(String::from),
            ArtifactStore::solver_ref(id),
        )
    }

    fn ops(replies: Vec<ChatReply>) -> (Operators, Arc<ScriptedClient>) {
        let client = Arc::new(ScriptedClient::new("gen-model", replies));
        let mut rates = BTreeMap::new();
        rates.insert("gen-model".to_string(), Rate { input: 0.5, output: 2.0 });
        (Operators::new(RoleMap::uniform(client.clone()), Templates::builtin(), rates), client)
    }

    fn texts(t: &[&str]) -> Vec<ChatReply> {
        t.iter().map(|s| ChatReply::text(*s)).collect()
    }

    const CODE_REPLY: &str = "Sort and insert.\n```python\ndef solve(**kw):\n    yield {}\n```";

    fn entry(branch: u32, tag: &str) -> GlobalMemoryEntry {
        GlobalMemoryEntry::new(branch, format!("design {tag}"), format!("failure {tag}"), format!("AVOID-{tag}")).unwrap()
    }

    #[test]
    fn propose_renders_global_memory() {
        let (mut o, client) = ops(texts(&[CODE_REPLY, CODE_REPLY]));
        let empty = GlobalMemory::default();
        let view = MemoryView {
            task_description: "TASK",
            branches: &[],
            global: &empty,
            ablations: Ablations::default(),
        };
        let g = o.propose(&view).unwrap();
        assert_eq!(g.sketch, "Sort and insert.");
        assert_eq!(g.source, "def solve(**kw):\n    yield {}");
        let mut global = GlobalMemory::default();
        global.add_entry(entry(1, "one")).unwrap();
        global.add_entry(entry(2, "two")).unwrap();
        let view = MemoryView { global: &global, ..view };
        o.propose(&view).unwrap();
        let prompts = client.prompts();
        assert!(prompts[0].contains(prompt::EMPTY_GLOBAL_MEMORY) && prompts[0].contains("TASK"));
        assert!(prompts[1].contains("AVOID-one") && prompts[1].contains("AVOID-two"));
        assert!(!prompts[1].contains(prompt::EMPTY_GLOBAL_MEMORY));
    }

    #[test]
    fn missing_fence_fails_after_reasks() {
        let (mut o, client) = ops(texts(&["no code", "still none", "nope"]));
        let view = MemoryView {
            task_description: "T",
            branches: &[],
            global: &GlobalMemory::default(),
            ablations: Ablations::default(),
        };
        let err = o.propose(&view).unwrap_err();
        assert!(matches!(err, OperatorError::ParseFailure { role: Role::Propose, attempts: 3, .. }));
        assert_eq!(o.ledger().entries().len(), 3);
        assert!(client.prompts()[1].contains("could not be used: no fenced code block"));
    }

    #[test]
    fn forbidden_import_is_reasked() {
        let bad = "Use CP-SAT.\n```python\nfrom ortools.sat.python import cp_model\n```";
        let (mut o, _) = ops(texts(&[bad, CODE_REPLY]));
        let view = MemoryView {
            task_description: "T",
            branches: &[],
            global: &GlobalMemory::default(),
            ablations: Ablations::default(),
        };
        assert_eq!(o.propose(&view).unwrap().sketch, "Sort and insert.");
        assert_eq!(o.ledger().entries().len(), 2);
    }

    fn three_record_branch() -> BranchLocalMemory {
        let mut b = BranchLocalMemory::new(1);
        b.append_record(rec("r1", 1, None, vec![overlap("a")])).unwrap();
        b.append_record(rec("r2", 2, Some("r1"), vec![good("a", 0.4)])).unwrap();
        b.append_record(rec("r3", 3, Some("r2"), vec![good("a", 0.6)])).unwrap();
        b
    }

    #[test]
    fn refinement_context_and_ablations() {
        let branch = three_record_branch();
        let branches = [branch.clone()];
        let global = GlobalMemory::default();
        let (o, _) = ops(vec![]);
        let mut view = MemoryView {
            task_description: "T",
            branches: &branches,
            global: &global,
            ablations: Ablations::default(),
        };
        let r1 = &branch.records()[0];
        let p = o.render_refinement(Role::Repair, &view, &branch, r1, "PARENT-CODE").unwrap();
        assert!(p.contains("PARENT-CODE") && p.contains("overlap") && p.contains("boxes 1 and 2 intersect"));
        let (i1, i2, i3) = (p.find("sketch-r1").unwrap(), p.find("sketch-r2").unwrap(), p.find("sketch-r3").unwrap());
        assert!(i1 < i2 && i2 < i3);

        let r3 = &branch.records()[2];
        view.ablations.no_failed_nodes = true;
        let p = o.render_refinement(Role::Improve, &view, &branch, r3, "C").unwrap();
        assert!(!p.contains("sketch-r1") && p.contains("sketch-r2"));

        view.ablations = Ablations { no_branch_local: true, ..Default::default() };
        let p = o.render_refinement(Role::Improve, &view, &branch, r3, "C").unwrap();
        assert!(!p.contains("sketch-r1") && !p.contains("sketch-r2") && p.contains("sketch-r3"));
        assert!(p.contains("No bugs, improved score"));
    }

    #[test]
    fn critic_placeholders_json_and_fallback() {
        let report = ExecutionReport::from_outcomes(vec![overlap("a")]).unwrap();
        let (mut o, client) = ops(texts(&[
            "Here you go: {\"is_bug\": true, \"summary\": \"overlap bug\"} thanks",
            "junk",
            "{\"is_bug\": \"yes\"}",
            "nothing",
        ]));
        let d = o.critic("CUR", &report, None).unwrap();
        assert_eq!((d.is_bug, d.summary.as_str(), d.fallback), (true, "overlap bug", false));
        assert!(client.prompts()[0].contains(prompt::NO_PREVIOUS_CODE));
        assert!(client.prompts()[0].contains(prompt::NO_PREVIOUS_LOGS));
        let d = o.critic("CUR", &report, None).unwrap();
        assert!(d.fallback && d.is_bug && d.summary.contains("violated overlap"));
        assert_eq!(o.ledger().entries().len(), 4);
    }

    #[test]
    fn timeouts_alone_are_not_bugs() {
        let report = ExecutionReport::from_outcomes(vec![good("a", 1.0), eo("b", Status::TimeoutNoYield, None, 0.0)]).unwrap();
        let (mut o, _) = ops(texts(&["{\"is_bug\": true, \"summary\": \"slow\"}"]));
        assert!(!o.critic("C", &report, None).unwrap().is_bug);
        assert!(!fallback_diagnostic(&report).is_bug);
        let crashed = ExecutionReport::from_outcomes(vec![eo("b", Status::Crashed, None, 0.0)]).unwrap();
        assert!(fallback_diagnostic(&crashed).is_bug);
    }

    #[test]
    fn reflect_parses_or_falls_back() {
        let branch = three_record_branch();
        let global = GlobalMemory::default();
        let view = MemoryView {
            task_description: "T",
            branches: std::slice::from_ref(&branch),
            global: &global,
            ablations: Ablations::default(),
        };
        let ok = r#"{"algorithmic design": "greedy", "failure and stagnation reason": ["slow", "stuck"], "constraint": "cap loops"}"#;
        let (mut o, client) = ops(texts(&[ok, r#"{"algorithmic design": "x", "failure and stagnation reason": "y"}"#, "a", "b"]));
        let e = o.reflect(&view, &branch).unwrap();
        assert_eq!(e.failure_modes, "slow; stuck");
        assert_eq!(e.token_estimate, 5);
        assert_eq!(client.prompts()[0].matches("- depth").count(), 3);
        let e = o.reflect(&view, &branch).unwrap();
        assert_eq!(e.algorithmic_design, "sketch-r3");
        assert!(e.failure_modes.contains("overlap"));
        assert!(!e.avoidance_directives.is_empty());
    }

    #[test]
    fn ledger_costs_and_approximation() {
        let mut with_usage = ChatReply::text(CODE_REPLY);
        with_usage.input_tokens = Some(100);
        with_usage.output_tokens = Some(10);
        let (mut o, _) = ops(vec![with_usage, ChatReply::text(CODE_REPLY)]);
        let view = MemoryView {
            task_description: "T",
            branches: &[],
            global: &GlobalMemory::default(),
            ablations: Ablations::default(),
        };
        o.propose(&view).unwrap();
        o.propose(&view).unwrap();
        let e = o.ledger().entries();
        assert_eq!((e[0].cost, e[0].approximate), (70.0, false));
        assert!(e[1].approximate);
        assert_eq!(e[1].output_tokens, estimate_tokens(CODE_REPLY) as u64);
        let t = o.ledger().totals();
        assert_eq!(t.input_tokens, e[0].input_tokens + e[1].input_tokens);
        assert_eq!(t.cost, e[0].cost + e[1].cost);
    }
}
