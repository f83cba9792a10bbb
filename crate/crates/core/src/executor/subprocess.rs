//! Worker runtime that spawns one sandboxed process per instance.

use std::io::{BufRead, BufReader, Read};
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{sync_channel, RecvTimeoutError};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{ExecutionOutcome, ExecutorError, StreamState, WorkerExit, WorkerRequest, WorkerRuntime};

/// Isolation applied to every worker process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxPolicy {
    /// Run inside a fresh user and network namespace via `unshare -rn`.
    pub isolate_network: bool,
    /// Address-space limit in MiB.
    pub memory_limit_mb: Option<u64>,
}

impl SandboxPolicy {
    /// Confirms the host can enforce the policy.
    ///
    /// With `insecure_override` an unsupported network isolation is dropped
    /// with a warning instead of failing.
    pub fn resolve(requested: SandboxPolicy, insecure_override: bool) -> Result<SandboxPolicy, ExecutorError> {
        if !requested.isolate_network {
            return Ok(requested);
        }
        match probe_network_isolation() {
            Ok(()) => Ok(requested),
            Err(reason) if insecure_override => {
                tracing::warn!(%reason, "network isolation unavailable; running workers without it");
                Ok(SandboxPolicy {
                    isolate_network: false,
                    ..requested
                })
            }
            Err(reason) => Err(ExecutorError::PolicyUnsupported(reason)),
        }
    }
}

/// Checks that `unshare -rn true` succeeds on this host.
pub fn probe_network_isolation() -> Result<(), String> {
    match Command::new("unshare")
        .args(["-rn", "true"])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .output()
    {
        Ok(out) if out.status.success() => Ok(()),
        Ok(out) => Err(format!(
            "unshare -rn exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )),
        Err(e) => Err(format!("unshare not runnable: {e}")),
    }
}

/// Spawns `<command...> <solver_path> <instance_path> <deadline_epoch_secs>`
/// in a scratch directory with a cleared environment.
#[derive(Debug, Clone)]
pub struct SubprocessRuntime {
    command: Vec<String>,
    solver_file_name: String,
    policy: SandboxPolicy,
    scratch_root: Option<PathBuf>,
}

impl SubprocessRuntime {
    pub fn new(command: Vec<String>, solver_file_name: impl Into<String>, policy: SandboxPolicy) -> Self {
        SubprocessRuntime {
            command,
            solver_file_name: solver_file_name.into(),
            policy,
            scratch_root: None,
        }
    }

    /// Parent directory for per-worker scratch directories; the system temp dir otherwise.
    pub fn with_scratch_root(mut self, root: PathBuf) -> Self {
        self.scratch_root = Some(root);
        self
    }

    pub fn policy(&self) -> &SandboxPolicy {
        &self.policy
    }

    fn build_command(&self, args: [String; 3], scratch: &std::path::Path) -> Result<Command, ExecutorError> {
        let mut argv: Vec<String> = Vec::new();
        if self.policy.isolate_network {
            argv.extend(["unshare".to_string(), "-rn".to_string()]);
        }
        argv.extend(self.command.iter().cloned());
        argv.extend(args);
        let (program, rest) = argv.split_first().ok_or_else(|| ExecutorError::ShimUnavailable {
            command: String::new(),
            reason: "empty runtime command".into(),
        })?;
        let mut cmd = Command::new(program);
        cmd.args(rest)
            .current_dir(scratch)
            .env_clear()
            .env("PATH", std::env::var("PATH").unwrap_or_else(|_| "/usr/local/bin:/usr/bin:/bin".into()))
            .env("HOME", scratch)
            .env("LANG", "C.UTF-8")
            .env("PYTHONUNBUFFERED", "1")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        if let Some(mb) = self.policy.memory_limit_mb {
            let bytes = mb.saturating_mul(1024 * 1024) as libc::rlim_t;
            // SAFETY: setrlimit is async-signal-safe and touches no parent state.
            unsafe {
                cmd.pre_exec(move || {
                    let lim = libc::rlimit {
                        rlim_cur: bytes,
                        rlim_max: bytes,
                    };
                    if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                        return Err(std::io::Error::last_os_error());
                    }
                    Ok(())
                });
            }
        }
        Ok(cmd)
    }
}

enum Event {
    Stdout(String, Instant),
    Stderr(String),
}

fn kill_group(child: &Child) {
    // SAFETY: plain syscall on the group we created with process_group(0).
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

fn exit_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(1)
}

impl WorkerRuntime for SubprocessRuntime {
    fn run(&self, request: &WorkerRequest<'_>) -> Result<ExecutionOutcome, ExecutorError> {
        let scratch = match &self.scratch_root {
            Some(root) => tempfile::Builder::new().prefix("worker-").tempdir_in(root)?,
            None => tempfile::Builder::new().prefix("worker-").tempdir()?,
        };
        let solver_path = scratch.path().join(&self.solver_file_name);
        let instance_path = scratch.path().join("instance.json");
        std::fs::write(&solver_path, request.solver_source)?;
        std::fs::write(&instance_path, request.instance.payload.to_value().to_string())?;

        let deadline_epoch = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs_f64()
            + request.timeout.as_secs_f64();
        let args = [
            solver_path.display().to_string(),
            instance_path.display().to_string(),
            format!("{deadline_epoch:.3}"),
        ];
        let mut cmd = self.build_command(args, scratch.path())?;
        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|e| ExecutorError::ShimUnavailable {
            command: self.command.join(" "),
            reason: e.to_string(),
        })?;

        let (tx, rx) = sync_channel::<Event>(1024);
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");
        let out_tx = tx.clone();
        let out_reader = std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut buf = Vec::new();
            loop {
                buf.clear();
                match reader.read_until(b'\n', &mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        let at = Instant::now();
                        let text = String::from_utf8_lossy(&buf);
                        let line = text.trim_end_matches(['\n', '\r']).to_string();
                        if out_tx.send(Event::Stdout(line, at)).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        let err_reader = std::thread::spawn(move || {
            let mut stderr = stderr;
            let mut chunk = [0u8; 8192];
            loop {
                match stderr.read(&mut chunk) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        let text = String::from_utf8_lossy(&chunk[..n]).into_owned();
                        if tx.send(Event::Stderr(text)).is_err() {
                            break;
                        }
                    }
                }
            }
        });

        let timeout = request.timeout.as_secs_f64();
        let kill_at = start + request.timeout + request.grace;
        let mut state = StreamState::new(&request.instance.instance_id, timeout, request.log_cap);
        let handle = |state: &mut StreamState, ev: Event| match ev {
            Event::Stdout(line, at) => state.on_stdout_line(&line, at.duration_since(start).as_secs_f64()),
            Event::Stderr(text) => state.on_stderr(&text),
        };

        let mut streams_open = true;
        let exit = loop {
            if let Some(status) = child.try_wait()? {
                break WorkerExit::Exited(exit_code(status));
            }
            let now = Instant::now();
            if now >= kill_at {
                kill_group(&child);
                child.wait()?;
                break WorkerExit::Killed;
            }
            if streams_open {
                let wait = (kill_at - now).min(Duration::from_millis(50));
                match rx.recv_timeout(wait) {
                    Ok(ev) => handle(&mut state, ev),
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => streams_open = false,
                }
            } else {
                std::thread::sleep((kill_at - now).min(Duration::from_millis(10)));
            }
        };
        let ended = Instant::now();
        // reap stragglers left in the group so the pipes close
        kill_group(&child);
        let drain_until = Instant::now() + Duration::from_millis(500);
        loop {
            let left = drain_until.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(ev) => handle(&mut state, ev),
                Err(_) => break,
            }
        }
        drop(rx);
        let _ = out_reader.join();
        let _ = err_reader.join();

        let cap = (request.timeout + request.grace).as_secs_f64();
        let wall_time = ended.duration_since(start).as_secs_f64().min(cap);
        Ok(state.finish(exit, wall_time, request.strict_crash_voids_yields))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Status;
    use super::*;
    use crate::problem::{generate_instance, DomainId, SizeClass};

    fn run(script: &str, timeout: f64, policy: SandboxPolicy) -> ExecutionOutcome {
        let inst = generate_instance(DomainId::Rcsp, SizeClass::Small, 1);
        let rt = SubprocessRuntime::new(vec!["sh".into()], "solver.sh", policy);
        let req = WorkerRequest {
            solver_source: script,
            instance: &inst,
            timeout: Duration::from_secs_f64(timeout),
            grace: Duration::from_millis(300),
            log_cap: 4096,
            strict_crash_voids_yields: false,
        };
        rt.run(&req).unwrap()
    }

    fn open() -> SandboxPolicy {
        SandboxPolicy {
            isolate_network: false,
            memory_limit_mb: None,
        }
    }

    #[test]
    fn receives_arguments_and_yields() {
        let script = r#"test -f "$1" || exit 3
echo '{"seq": 1, "solution": {"path": [1]}}'
echo "deadline $2" >&2
"#;
        let out = run(script, 5.0, open());
        assert_eq!(out.status, Status::Solved, "{out:?}");
        assert!(out.stderr_log.contains("deadline "));
    }

    #[test]
    fn hanging_worker_is_killed_after_grace() {
        let out = run("echo '{\"seq\": 1, \"solution\": {}}'\nsleep 30\n", 0.3, open());
        assert_eq!(out.status, Status::Solved);
        assert!(out.wall_time <= 0.6 + 1e-9 && out.wall_time >= 0.59, "{}", out.wall_time);
    }

    #[test]
    fn environment_is_cleared() {
        std::env::set_var("HEURSYNTH_SECRET_PROBE", "x");
        let out = run("test -z \"$HEURSYNTH_SECRET_PROBE\" || exit 4\nexit 0\n", 2.0, open());
        assert_eq!(out.status, Status::YieldedNothing, "{out:?}");
    }

    #[test]
    fn missing_runtime_is_reported() {
        let inst = generate_instance(DomainId::Rcsp, SizeClass::Small, 1);
        let rt = SubprocessRuntime::new(vec!["/nonexistent/runtime".into()], "s", open());
        let req = WorkerRequest {
            solver_source: "",
            instance: &inst,
            timeout: Duration::from_secs(1),
            grace: Duration::from_millis(10),
            log_cap: 64,
            strict_crash_voids_yields: false,
        };
        assert!(matches!(rt.run(&req), Err(ExecutorError::ShimUnavailable { .. })));
    }

    #[test]
    fn isolated_worker_runs_when_supported() {
        let policy = SandboxPolicy {
            isolate_network: true,
            memory_limit_mb: Some(512),
        };
        let Ok(policy) = SandboxPolicy::resolve(policy, false) else { return };
        let out = run("echo '{\"seq\": 1, \"solution\": {}}'\n", 5.0, policy);
        assert_eq!(out.status, Status::Solved, "{out:?}");
    }
}
