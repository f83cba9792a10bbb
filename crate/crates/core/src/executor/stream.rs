//! Interpretation of a worker's output stream, shared by all runtimes.

use serde_json::Value;

use super::{ExecutionOutcome, Status};

/// Appended to a log that hit its byte cap.
pub const TRUNCATION_MARKER: &str = "\n[output truncated]\n";

/// Text buffer that keeps at most `cap` bytes and counts what it dropped.
#[derive(Debug, Clone)]
pub struct CappedLog {
    cap: usize,
    text: String,
    dropped: usize,
}

impl CappedLog {
    pub fn new(cap: usize) -> Self {
        CappedLog {
            cap,
            text: String::new(),
            dropped: 0,
        }
    }

    pub fn push(&mut self, s: &str) {
        let room = self.cap.saturating_sub(self.text.len());
        if s.len() <= room {
            self.text.push_str(s);
            return;
        }
        let mut cut = room;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        self.text.push_str(&s[..cut]);
        self.dropped += s.len() - cut;
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn into_string(mut self) -> String {
        if self.dropped > 0 {
            self.text.push_str(TRUNCATION_MARKER);
        }
        self.text
    }
}

/// How the worker process ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerExit {
    /// Exited on its own; signals are reported as `128 + signal`.
    Exited(i32),
    /// Killed by the executor at the deadline plus grace.
    Killed,
}

/// Accepts protocol lines received before the deadline and tracks the last good one.
#[derive(Debug)]
pub struct StreamState {
    instance_id: String,
    deadline: f64,
    last_seq: Option<i64>,
    last_solution: Option<Value>,
    yields: u32,
    stdout: CappedLog,
    stderr: CappedLog,
}

impl StreamState {
    /// `deadline` is in seconds since the worker started.
    pub fn new(instance_id: &str, deadline: f64, log_cap: usize) -> Self {
        StreamState {
            instance_id: instance_id.to_string(),
            deadline,
            last_seq: None,
            last_solution: None,
            yields: 0,
            stdout: CappedLog::new(log_cap),
            stderr: CappedLog::new(log_cap),
        }
    }

    fn note(&mut self, msg: &str) {
        self.stderr.push(&format!("[executor] {msg}\n"));
    }

    /// Handles one stdout line (without its newline) received `at` seconds after start.
    pub fn on_stdout_line(&mut self, line: &str, at: f64) {
        self.stdout.push(line);
        self.stdout.push("\n");
        if line.trim().is_empty() {
            return;
        }
        if at > self.deadline {
            self.note(&format!("line received at {at:.3}s after the deadline {:.3}s rejected", self.deadline));
            return;
        }
        let parsed: Option<(i64, Value)> = serde_json::from_str::<Value>(line).ok().and_then(|v| {
            let seq = v.get("seq")?.as_i64()?;
            let solution = v.get("solution")?.clone();
            Some((seq, solution))
        });
        let Some((seq, solution)) = parsed else {
            self.note("malformed solution line skipped");
            return;
        };
        if self.last_seq.is_some_and(|prev| seq <= prev) {
            self.note(&format!("non-increasing seq {seq} skipped"));
            return;
        }
        self.last_seq = Some(seq);
        self.last_solution = Some(solution);
        self.yields += 1;
    }

    pub fn on_stderr(&mut self, chunk: &str) {
        self.stderr.push(chunk);
    }

    pub fn finish(mut self, exit: WorkerExit, wall_time: f64, strict_crash_voids_yields: bool) -> ExecutionOutcome {
        let crashed = matches!(exit, WorkerExit::Exited(code) if code != 0);
        if crashed && strict_crash_voids_yields && self.yields > 0 {
            self.note("crash after yielding voids the yielded solutions");
            self.yields = 0;
            self.last_solution = None;
        }
        let status = if self.yields > 0 {
            Status::Solved
        } else {
            match exit {
                WorkerExit::Exited(0) => Status::YieldedNothing,
                WorkerExit::Exited(_) => Status::Crashed,
                WorkerExit::Killed => Status::TimeoutNoYield,
            }
        };
        ExecutionOutcome {
            instance_id: self.instance_id,
            status,
            last_solution: self.last_solution,
            yield_count: self.yields,
            stdout_log: self.stdout.into_string(),
            stderr_log: self.stderr.into_string(),
            wall_time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(seq: i64, x: i64) -> String {
        format!(r#"{{"seq": {seq}, "solution": {{"path": [{x}]}}}}"#)
    }

    #[test]
    fn keeps_last_line_before_deadline() {
        let mut s = StreamState::new("i", 10.0, 1024);
        s.on_stdout_line(&line(1, 1), 1.0);
        s.on_stdout_line(&line(2, 3), 3.0);
        s.on_stdout_line(&line(3, 9), 9.0);
        s.on_stdout_line(&line(4, 11), 10.5);
        let out = s.finish(WorkerExit::Killed, 11.0, false);
        assert_eq!(out.status, Status::Solved);
        assert_eq!(out.yield_count, 3);
        assert_eq!(out.last_solution.unwrap()["path"][0], 9);
        assert!(out.stderr_log.contains("after the deadline"));
    }

    #[test]
    fn malformed_and_stale_lines_are_skipped() {
        let mut s = StreamState::new("i", 10.0, 1024);
        s.on_stdout_line(&line(2, 1), 0.1);
        s.on_stdout_line("{not json", 0.2);
        s.on_stdout_line(&line(2, 5), 0.3);
        s.on_stdout_line(r#"{"seq": 3}"#, 0.4);
        let out = s.finish(WorkerExit::Exited(0), 1.0, false);
        assert_eq!(out.yield_count, 1);
        assert_eq!(out.last_solution.unwrap()["path"][0], 1);
        assert!(out.stderr_log.contains("malformed"));
        assert!(out.stderr_log.contains("non-increasing"));
    }

    #[test]
    fn status_table() {
        let s = StreamState::new("i", 1.0, 64);
        assert_eq!(s.finish(WorkerExit::Exited(0), 0.1, false).status, Status::YieldedNothing);
        let s = StreamState::new("i", 1.0, 64);
        assert_eq!(s.finish(WorkerExit::Exited(1), 0.1, false).status, Status::Crashed);
        let s = StreamState::new("i", 1.0, 64);
        assert_eq!(s.finish(WorkerExit::Killed, 2.0, false).status, Status::TimeoutNoYield);

        let mut s = StreamState::new("i", 1.0, 256);
        s.on_stdout_line(&line(1, 1), 0.1);
        assert_eq!(s.finish(WorkerExit::Exited(1), 0.2, false).status, Status::Solved);
        let mut s = StreamState::new("i", 1.0, 256);
        s.on_stdout_line(&line(1, 1), 0.1);
        let out = s.finish(WorkerExit::Exited(1), 0.2, true);
        assert_eq!((out.status, out.yield_count, out.last_solution), (Status::Crashed, 0, None));
    }

    #[test]
    fn log_cap_adds_marker() {
        let mut log = CappedLog::new(8);
        log.push("hello ");
        log.push("wörld and more");
        assert!(log.dropped() > 0);
        let s = log.into_string();
        assert!(s.starts_with("hello w"));
        assert!(s.ends_with(TRUNCATION_MARKER));
    }
}
