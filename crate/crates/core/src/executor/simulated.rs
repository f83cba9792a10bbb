//! In-process worker with virtual time, for deterministic runs and tests.
//!
//! The built-in interpreter reads the solver source as a small event script,
//! one directive per line; anything else is ignored:
//!
//! ```text
//! yield <t> <json>                  emit a protocol line with the next seq
//! yield-for <instance_id> <t> <json>
//! yield-oracle <t> [instance_id...] emit the enumerated optimum (all instances if none listed)
//! stdout <t> <text>                 raw stdout line
//! stderr <t> <text>
//! exit <t> <code>
//! hang                              never exit; killed at deadline plus grace
//! ```
//!
//! Without `exit` or `hang` the worker exits 0 right after its last event.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{ExecutionOutcome, ExecutorError, StreamState, WorkerExit, WorkerRequest, WorkerRuntime};
use crate::evaluate::oracle::oracle_best;

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Stdout(String),
    Stderr(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimExit {
    Code { at: f64, code: i32 },
    Hang,
}

/// Timed events of one simulated worker.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScript {
    pub events: Vec<(f64, SimEvent)>,
    pub exit: SimExit,
}

impl SimScript {
    /// Feeds the script through the shared stream interpreter.
    pub fn play(&self, request: &WorkerRequest<'_>) -> ExecutionOutcome {
        let deadline = request.timeout.as_secs_f64();
        let kill_at = deadline + request.grace.as_secs_f64();
        let (end, exit) = match self.exit {
            SimExit::Code { at, code } if at <= kill_at => (at, WorkerExit::Exited(code)),
            _ => (kill_at, WorkerExit::Killed),
        };
        let mut events: Vec<&(f64, SimEvent)> = self.events.iter().filter(|(t, _)| *t <= end).collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut state = StreamState::new(&request.instance.instance_id, deadline, request.log_cap);
        for (t, ev) in events {
            match ev {
                SimEvent::Stdout(line) => state.on_stdout_line(line, *t),
                SimEvent::Stderr(text) => state.on_stderr(&format!("{text}\n")),
            }
        }
        state.finish(exit, end.max(0.0), request.strict_crash_voids_yields)
    }
}

type Behaviour = dyn Fn(&WorkerRequest<'_>) -> SimScript + Send + Sync;

/// Worker runtime that never spawns a process.
#[derive(Clone)]
pub struct SimulatedRuntime {
    behaviour: Arc<Behaviour>,
}

impl std::fmt::Debug for SimulatedRuntime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SimulatedRuntime")
    }
}

impl SimulatedRuntime {
    pub fn new(behaviour: impl Fn(&WorkerRequest<'_>) -> SimScript + Send + Sync + 'static) -> Self {
        SimulatedRuntime {
            behaviour: Arc::new(behaviour),
        }
    }

    /// Interprets the solver source with the event-script language above.
    pub fn dsl() -> Self {
        SimulatedRuntime::new(parse_script)
    }
}

impl WorkerRuntime for SimulatedRuntime {
    fn run(&self, request: &WorkerRequest<'_>) -> Result<ExecutionOutcome, ExecutorError> {
        Ok((self.behaviour)(request).play(request))
    }
}

fn parse_time(s: Option<&str>) -> Option<f64> {
    s?.parse::<f64>().ok().filter(|t| t.is_finite())
}

/// Splits off the first whitespace-delimited word.
fn word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

fn parse_script(request: &WorkerRequest<'_>) -> SimScript {
    let instance_id = request.instance.instance_id.as_str();
    let mut events = Vec::new();
    let mut exit = None;
    let mut seq = 0u64;
    let mut emit_solution = |events: &mut Vec<(f64, SimEvent)>, t: f64, solution: Value| {
        seq += 1;
        let line = json!({"seq": seq, "solution": solution}).to_string();
        events.push((t, SimEvent::Stdout(line)));
    };
    for raw in request.solver_source.lines() {
        let (cmd, rest) = word(raw);
        match cmd {
            "yield" => {
                let (t, body) = word(rest);
                if let (Some(t), Ok(v)) = (parse_time(Some(t)), serde_json::from_str::<Value>(body)) {
                    emit_solution(&mut events, t, v);
                }
            }
            "yield-for" => {
                let (id, rest) = word(rest);
                let (t, body) = word(rest);
                if id != instance_id {
                    continue;
                }
                if let (Some(t), Ok(v)) = (parse_time(Some(t)), serde_json::from_str::<Value>(body)) {
                    emit_solution(&mut events, t, v);
                }
            }
            "yield-oracle" => {
                let (t, ids) = word(rest);
                let Some(t) = parse_time(Some(t)) else { continue };
                if !ids.is_empty() && !ids.split_whitespace().any(|id| id == instance_id) {
                    continue;
                }
                match oracle_best(request.instance) {
                    Ok(Some((solution, _))) => emit_solution(&mut events, t, solution.to_value()),
                    Ok(None) => events.push((t, SimEvent::Stderr("no feasible solution exists".into()))),
                    Err(e) => events.push((t, SimEvent::Stderr(e.to_string()))),
                }
            }
            "stdout" | "stderr" => {
                let (t, text) = word(rest);
                let Some(t) = parse_time(Some(t)) else { continue };
                let ev = if cmd == "stdout" {
                    SimEvent::Stdout(text.to_string())
                } else {
                    SimEvent::Stderr(text.to_string())
                };
                events.push((t, ev));
            }
            "exit" => {
                let (t, code) = word(rest);
                if let (Some(at), Ok(code)) = (parse_time(Some(t)), code.trim().parse::<i32>()) {
                    exit.get_or_insert(SimExit::Code { at, code });
                }
            }
            "hang" => {
                exit.get_or_insert(SimExit::Hang);
            }
            _ => {}
        }
    }
    let exit = exit.unwrap_or_else(|| SimExit::Code {
        at: events.iter().map(|(t, _)| *t).fold(0.0, f64::max),
        code: 0,
    });
    SimScript { events, exit }
}

#[cfg(test)]
mod tests {
    use super::super::Status;
    use super::*;
    use crate::problem::{generate_instance, DomainId, SizeClass};
    use std::time::Duration;

    fn run(src: &str, timeout: f64) -> ExecutionOutcome {
        let inst = generate_instance(DomainId::Rcsp, SizeClass::Small, 1);
        let req = WorkerRequest {
            solver_source: src,
            instance: &inst,
            timeout: Duration::from_secs_f64(timeout),
            grace: Duration::from_secs(1),
            log_cap: 4096,
            strict_crash_voids_yields: false,
        };
        SimulatedRuntime::dsl().run(&req).unwrap()
    }

    #[test]
    fn yields_then_hang_is_solved_with_capped_wall_time() {
        let out = run("yield 1 {\"path\": [1]}\nyield 3 {\"path\": [2]}\nyield 9 {\"path\": [3]}\nhang", 10.0);
        assert_eq!(out.status, Status::Solved);
        assert_eq!(out.yield_count, 3);
        assert_eq!(out.last_solution.unwrap()["path"][0], 3);
        assert_eq!(out.wall_time, 11.0);
    }

    #[test]
    fn late_yield_is_rejected() {
        let out = run("yield 2 {\"path\": [1]}\nyield 10.5 {\"path\": [9]}\nexit 10.6 0", 10.0);
        assert_eq!(out.yield_count, 1);
        assert_eq!(out.wall_time, 10.6);
    }

    #[test]
    fn crash_without_yield() {
        let out = run("stderr 0.1 boom\nexit 0.2 1", 10.0);
        assert_eq!(out.status, Status::Crashed);
        assert!(out.stderr_log.contains("boom"));
    }

    #[test]
    fn oracle_yield_is_targeted() {
        assert_eq!(run("yield-oracle 0.1 rcsp-small-1", 1.0).status, Status::Solved);
        assert_eq!(run("yield-oracle 0.1 other-id", 1.0).status, Status::YieldedNothing);
        assert_eq!(run("hang", 1.0).status, Status::TimeoutNoYield);
    }
}
