//! Prompt templates and the text sections substituted into them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OperatorError;
use crate::executor::{EvaluatedOutcome, Status};
use crate::memory::{BranchLocalMemory, GlobalMemory, GlobalMemoryEntry, Record};

pub const PLACEHOLDERS: &[&str] = &[
    "task_description",
    "global_memory",
    "branch_memory",
    "previous_code",
    "execution_output",
    "parent_code",
    "current_code",
    "previous_logs",
    "current_logs",
    "trajectory_history",
];

pub const NO_PREVIOUS_CODE: &str = "No previous implementation (Initial Draft)";
pub const NO_PREVIOUS_LOGS: &str = "No previous logs (Initial Draft)";
pub const EMPTY_GLOBAL_MEMORY: &str = "None yet. This is the first design branch.";
pub const EMPTY_BRANCH_MEMORY: &str = "No earlier attempts in this branch.";

/// Log bytes shown per instance in an execution summary.
pub const LOG_BYTES_PER_INSTANCE: usize = 2048;
/// Instances shown in an execution summary.
pub const MAX_INSTANCES_SHOWN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Proposer,
    Improve,
    Debug,
    Critic,
    Reflection,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Proposer,
        TemplateId::Improve,
        TemplateId::Debug,
        TemplateId::Critic,
        TemplateId::Reflection,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::Proposer => "proposer.txt",
            TemplateId::Improve => "improve.txt",
            TemplateId::Debug => "debug.txt",
            TemplateId::Critic => "critic.txt",
            TemplateId::Reflection => "reflection.txt",
        }
    }
}

/// The five template bodies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    bodies: BTreeMap<TemplateId, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Templates::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        let bodies = [
            (TemplateId::Proposer, include_str!("../../templates/proposer.txt")),
            (TemplateId::Improve, include_str!("../../templates/improve.txt")),
            (TemplateId::Debug, include_str!("../../templates/debug.txt")),
            (TemplateId::Critic, include_str!("../../templates/critic.txt")),
            (TemplateId::Reflection, include_str!("../../templates/reflection.txt")),
        ];
        Templates {
            bodies: bodies.into_iter().map(|(id, b)| (id, b.to_string())).collect(),
        }
    }

    /// Loads `<dir>/<template>.txt`, falling back to the built-in body for missing files.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Templates::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(id.file_name());
            if path.exists() {
                t.bodies.insert(id, std::fs::read_to_string(path)?);
            }
        }
        Ok(t)
    }

    pub fn body(&self, id: TemplateId) -> &str {
        &self.bodies[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &[(&str, &str)]) -> Result<String, OperatorError> {
        render(self.body(id), bindings)
    }
}

/// Single pass over `body`: each `{name}` with a known placeholder name is
/// replaced by its binding; substituted text is never rescanned.
pub fn render(body: &str, bindings: &[(&str, &str)]) -> Result<String, OperatorError> {
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        let name = &after[..name_len];
        if after[name_len..].starts_with('}') && PLACEHOLDERS.contains(&name) {
            let value = bindings
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| OperatorError::UnboundPlaceholder(name.to_string()))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Keeps the last `max` bytes of `s` on a char boundary.
fn tail(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

fn head(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    &s[..s.floor_char_boundary(max)]
}

/// Per-instance statuses, first violation and bounded logs; failing instances first.
pub fn render_execution_output(valid: u8, score: f64, outcomes: &[EvaluatedOutcome]) -> String {
    let solved = outcomes.iter().filter(|o| o.is_valid()).count();
    let mut out = format!(
        "Valid on {solved} of {} instances (all valid: {}). Mean score: {score:.4}.\n",
        outcomes.len(),
        if valid == 1 { "yes" } else { "no" }
    );
    let mut order: Vec<&EvaluatedOutcome> = outcomes.iter().filter(|o| !o.is_valid()).collect();
    order.extend(outcomes.iter().filter(|o| o.is_valid()));
    for o in order.iter().take(MAX_INSTANCES_SHOWN) {
        let e = &o.outcome;
        out.push_str(&format!(
            "\n## Instance {}: {} after {} yield(s), {:.2}s, score {:.4}\n",
            e.instance_id,
            e.status.as_str(),
            e.yield_count,
            e.wall_time,
            o.score.score
        ));
        match &o.evaluation {
            Some(ev) => match ev.violation() {
                Some(v) => out.push_str(&format!(
                    "Violation: {} on {:?}: {}\n",
                    v.constraint, v.entities, v.detail
                )),
                None => out.push_str(&format!("Feasible, objective {}\n", ev.objective().unwrap_or_default())),
            },
            None if e.status == Status::TimeoutNoYield => out.push_str("No solution yielded before the time limit.\n"),
            None => out.push_str("No solution to evaluate.\n"),
        }
        let stderr = tail(&e.stderr_log, LOG_BYTES_PER_INSTANCE);
        let stdout = head(&e.stdout_log, LOG_BYTES_PER_INSTANCE - stderr.len());
        if !stderr.trim().is_empty() {
            out.push_str(&format!("stderr:\n{}\n", stderr.trim_end()));
        }
        if !stdout.trim().is_empty() {
            out.push_str(&format!("stdout:\n{}\n", stdout.trim_end()));
        }
    }
    if outcomes.len() > MAX_INSTANCES_SHOWN {
        out.push_str(&format!("\n({} more instances not shown)\n", outcomes.len() - MAX_INSTANCES_SHOWN));
    }
    out
}

/// Outcome label of a record relative to the record it was derived from.
pub fn record_label(record: &Record, parent: Option<&Record>) -> &'static str {
    if !record.is_valid() || record.diagnostic.is_bug {
        return "Bug";
    }
    let before = parent.map_or(0.0, |p| p.score);
    if record.score > before {
        "No bugs, improved score"
    } else if record.score < before {
        "No bugs, worsened score"
    } else {
        "No change"
    }
}

/// One history entry: depth, sketch, diagnosis, validity and score.
pub fn render_record(record: &Record, parent: Option<&Record>) -> String {
    format!(
        "- depth {} [{}] valid={} score={:.4}\n  sketch: {}\n  diagnosis: {}",
        record.depth,
        record_label(record, parent),
        record.valid,
        record.score,
        one_line(&record.sketch),
        one_line(&record.diagnostic.summary)
    )
}

fn one_line(s: &str) -> String {
    let joined = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        "(none)".into()
    } else {
        joined
    }
}

/// The branch's records in depth order.
pub fn render_history<'a>(branch: &BranchLocalMemory, records: impl IntoIterator<Item = &'a Record>) -> String {
    let lines: Vec<String> = records
        .into_iter()
        .map(|r| render_record(r, r.parent_record_id.as_deref().and_then(|p| branch.get(p))))
        .collect();
    if lines.is_empty() {
        EMPTY_BRANCH_MEMORY.to_string()
    } else {
        lines.join("\n")
    }
}

pub fn render_global_entry(e: &GlobalMemoryEntry) -> String {
    format!(
        "- Branch {}\n  Algorithmic design: {}\n  Failure and stagnation reason: {}\n  Constraint: {}",
        e.branch_id,
        one_line(&e.algorithmic_design),
        one_line(&e.failure_modes),
        one_line(&e.avoidance_directives)
    )
}

pub fn render_global_memory(global: &GlobalMemory) -> String {
    if global.is_empty() {
        return EMPTY_GLOBAL_MEMORY.to_string();
    }
    global.entries.iter().map(render_global_entry).collect::<Vec<_>>().join("\n")
}

/// All records of all branches with each branch's summary after it, in creation order.
pub fn render_flat_memory(branches: &[BranchLocalMemory], global: &GlobalMemory) -> String {
    let mut parts = Vec::new();
    for b in branches {
        for r in b.records() {
            let parent = r.parent_record_id.as_deref().and_then(|p| b.get(p));
            parts.push(format!("(branch {}) {}", b.branch_id, render_record(r, parent).trim_start_matches("- ")));
        }
        if let Some(e) = global.entries.iter().find(|e| e.branch_id == b.branch_id) {
            parts.push(render_global_entry(e));
        }
    }
    if parts.is_empty() {
        EMPTY_GLOBAL_MEMORY.to_string()
    } else {
        parts.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_once_and_leaves_other_braces() {
        let out = render(
            "A {task_description} B {\"is_bug\": x} {unknown} {global_memory}",
            &[("task_description", "{global_memory}"), ("global_memory", "G")],
        )
        .unwrap();
        assert_eq!(out, "A {global_memory} B {\"is_bug\": x} {unknown} G");
    }

    #[test]
    fn unbound_placeholder_fails() {
        assert!(matches!(
            render("x {current_code}", &[]),
            Err(OperatorError::UnboundPlaceholder(p)) if p == "current_code"
        ));
    }

    #[test]
    fn builtin_templates_use_only_known_placeholders() {
        let t = Templates::builtin();
        let all: Vec<(&str, &str)> = PLACEHOLDERS.iter().map(|p| (*p, "")).collect();
        for id in TemplateId::ALL {
            let rendered = t.render(id, &all).unwrap();
            for p in PLACEHOLDERS {
                assert!(!rendered.contains(&format!("{{{p}}}")), "{id:?} left {p}");
            }
        }
        assert!(t.body(TemplateId::Critic).contains("{current_logs}"));
        assert!(t.body(TemplateId::Reflection).contains("{trajectory_history}"));
    }

    #[test]
    fn tail_and_head_respect_char_boundaries() {
        assert_eq!(tail("aé", 1), "");
        assert_eq!(tail("abc", 2), "bc");
        assert_eq!(head("éa", 1), "");
    }
}
