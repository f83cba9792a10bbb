//! `heursynth`: command-line client of the synthesis service.
//!
//! Talks to `--server` when given, otherwise starts the service in-process on
//! a loopback port for the duration of the command.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use heursynth_client::{Client, ClientError};
use heursynth_core::api::{
    ErrorKind, GenerateRequest, GradeRequest, JobResult, JobState, ReportRequest, StabilityRequest,
    SynthesizeRequest,
};
use heursynth_core::{DomainId, SizeClass, Split};

#[derive(Parser)]
#[command(name = "heursynth", version, about = "Synthesize heuristic solvers by memory-guided tree search")]
struct Cli {
    /// Base URL of a running service; an embedded one is started when absent.
    #[arg(long, global = true, env = "HEURSYNTH_SERVER")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthesis and evaluate the selected solver on the test split.
    Synthesize(SynthesizeArgs),
    /// Write CSV and JSON reports for a run directory.
    Report {
        /// Run directory written by `synthesize`.
        #[arg(long)]
        run: PathBuf,
        /// Output directory; defaults to `<run>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one solution against one instance.
    Grade {
        #[arg(long)]
        domain: DomainId,
        /// An instance entry, or a dataset file together with `--instance-id`.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        instance_id: Option<String>,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Generate a dataset file.
    Generate {
        #[arg(long)]
        domain: DomainId,
        #[arg(long, default_value = "small")]
        size: SizeClass,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attach oracle reference objectives (small instances only).
        #[arg(long)]
        with_references: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the search with consecutive seeds and summarize test metrics.
    Stability {
        #[command(flatten)]
        inputs: RunInputs,
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
}

#[derive(Args)]
struct RunInputs {
    /// JSON config with sections {search, roles, sandbox, rates}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Expected domain of both datasets.
    #[arg(long)]
    domain: Option<DomainId>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    depth_cap: Option<u32>,
    /// Per-instance time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    inputs: RunInputs,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Debug)]
struct Failure {
    kind: ErrorKind,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Resolves relative paths inside the config against the config file's directory.
fn rebase_config_paths(config: &mut Value, base: &Path) {
    let rebase = |v: &mut Value| {
        if let Some(p) = v.as_str().map(PathBuf::from) {
            if p.is_relative() {
                *v = Value::String(base.join(p).display().to_string());
            }
        }
    };
    if let Some(v) = config.get_mut("templates_dir") {
        rebase(v);
    }
    if let Some(v) = config.pointer_mut("/sandbox/scratch_root") {
        rebase(v);
    }
}

struct LoadedInputs {
    config: Value,
    dev: Value,
    test: Value,
}

fn load_inputs(args: &RunInputs) -> Result<LoadedInputs, Failure> {
    let mut config = read_json(&args.config)?;
    if !config.is_object() {
        return Err(Failure::usage(format!("{}: config must be a JSON object", args.config.display())));
    }
    let base = absolute(&args.config)?.parent().map(Path::to_path_buf).unwrap_or_default();
    rebase_config_paths(&mut config, &base);
    let search = config
        .as_object_mut()
        .expect("checked above")
        .entry("search")
        .or_insert_with(|| Value::Object(Default::default()));
    if let Some(search) = search.as_object_mut() {
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                search.insert(key.to_string(), v);
            }
        };
        set("budget", args.budget.map(Value::from));
        set("depth_cap", args.depth_cap.map(Value::from));
        set("timeout_s", args.timeout.map(Value::from));
        set("rng_seed", args.seed.map(Value::from));
        set("parallelism", args.parallelism.map(Value::from));
    }
    let dev = read_json(&args.dev)?;
    let test = read_json(&args.test)?;
    if let Some(domain) = args.domain {
        for (name, ds) in [("dev", &dev), ("test", &test)] {
            if ds.get("domain").and_then(Value::as_str) != Some(domain.as_str()) {
                return Err(Failure::usage(format!("{name} dataset is not a {} dataset", domain.as_str())));
            }
        }
    }
    Ok(LoadedInputs { config, dev, test })
}

async fn finish_job(client: &Client, job_id: &str) -> Result<JobResult, Failure> {
    let status = client.wait_job(job_id).await?;
    match (status.state, status.result, status.error) {
        (JobState::Succeeded, Some(result), _) => Ok(result),
        (_, _, Some(e)) => Err(Failure {
            kind: e.kind,
            message: e.message,
        }),
        _ => Err(Failure {
            kind: ErrorKind::Runtime,
            message: format!("job {job_id} ended without a result"),
        }),
    }
}

async fn run(client: &Client, command: Command) -> Result<(), Failure> {
    match command {
        Command::Synthesize(args) => {
            let inputs = load_inputs(&args.inputs)?;
            let req = SynthesizeRequest {
                config: inputs.config,
                dev: inputs.dev,
                test: inputs.test,
                out_dir: absolute(&args.out)?,
                run_id: args.run_id,
            };
            let job = client.submit_run(&req).await?;
            let JobResult::Synthesize(s) = finish_job(client, &job.job_id).await? else {
                return Err(Failure::usage("server returned a result of the wrong kind"));
            };
            println!("run {} written to {}", s.run_id, s.out_dir.display());
            println!(
                "selected {} (dev valid {}, dev score {:.4})",
                s.selected_record_id, s.dev_valid, s.dev_score
            );
            println!("executions {} in {} branches, stranded budget {}", s.executions, s.branches, s.stranded_budget);
            println!("test mean score {:.4}", s.test_mean_score);
            println!("test mean valid {:.4}", s.test_mean_valid);
        }
        Command::Report { run, out } => {
            let req = ReportRequest {
                artifact_dir: absolute(&run)?,
                out_dir: out.as_deref().map(absolute).transpose()?,
            };
            let files = client.report(&req).await?;
            for f in &files.files {
                println!("{}", files.out_dir.join(f).display());
            }
        }
        Command::Grade {
            domain,
            instance,
            instance_id,
            solution,
        } => {
            let mut inst = read_json(&instance)?;
            if let Some(items) = inst.get("instances").and_then(Value::as_array) {
                let id = instance_id
                    .ok_or_else(|| Failure::usage("--instance-id is required when --instance is a dataset"))?;
                inst = items
                    .iter()
                    .find(|i| i.get("instance_id").and_then(Value::as_str) == Some(id.as_str()))
                    .cloned()
                    .ok_or_else(|| Failure::usage(format!("no instance {id} in {}", instance.display())))?;
            }
            let req = GradeRequest {
                domain,
                instance: inst,
                solution: read_json(&solution)?,
            };
            let g = client.grade(&req).await?;
            println!("instance {}", g.instance_id);
            match g.outcome.violation() {
                None => {
                    println!("feasible");
                    println!("objective {}", g.outcome.objective().unwrap_or_default());
                }
                Some(v) => {
                    println!("infeasible");
                    println!("violation {} {:?}: {}", v.constraint.as_str(), v.entities, v.detail);
                }
            }
            match g.score {
                Some(s) => println!("score {:.6}", s.score),
                None => println!("score unavailable (no reference_objective)"),
            }
        }
        Command::Generate {
            domain,
            size,
            split,
            count,
            seed,
            with_references,
            out,
        } => {
            let req = GenerateRequest {
                domain,
                size,
                split,
                count,
                base_seed: seed,
                with_references,
            };
            let resp = client.generate(&req).await?;
            let mut text = serde_json::to_string_pretty(&resp.dataset).expect("dataset serializes");
            text.push('\n');
            std::fs::write(&out, text).map_err(|e| Failure {
                kind: ErrorKind::Runtime,
                message: format!("{}: {e}", out.display()),
            })?;
            println!("wrote {count} {} instances to {}", domain.as_str(), out.display());
        }
        Command::Stability { inputs, runs } => {
            let inputs = load_inputs(&inputs)?;
            let req = StabilityRequest {
                config: inputs.config,
                dev: inputs.dev,
                test: inputs.test,
                run_count: runs,
            };
            let job = client.submit_stability(&req).await?;
            let JobResult::Stability(s) = finish_job(client, &job.job_id).await? else {
                return Err(Failure::usage("server returned a result of the wrong kind"));
            };
            for r in &s.runs {
                println!(
                    "run {} seed {}: selected {} test score {:.4} valid {:.4}",
                    r.run_index, r.rng_seed, r.selected_record_id, r.test_mean_score, r.test_mean_valid
                );
            }
            println!("score mean {:.4} stdev {}", s.mean_score, s.stdev_score);
            println!("valid mean {:.4} stdev {}", s.mean_valid, s.stdev_valid);
        }
    }
    Ok(())
}

async fn connect(server: Option<String>) -> Result<Client, Failure> {
    let base = match server {
        Some(url) => url,
        None => {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| Failure {
                kind: ErrorKind::Runtime,
                message: format!("could not start embedded service: {e}"),
            })?;
            let addr = listener.local_addr().map_err(|e| Failure {
                kind: ErrorKind::Runtime,
                message: e.to_string(),
            })?;
            tokio::spawn(heursynth_server::serve(listener));
            format!("http://{addr}/")
        }
    };
    Ok(Client::new(&base)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = runtime.block_on(async {
        let client = connect(cli.server).await?;
        run(&client, cli.command).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.kind.exit_code() as u8)
        }
    }
}
