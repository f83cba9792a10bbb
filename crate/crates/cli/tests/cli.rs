use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn heursynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heursynth"))
        .args(args)
        .env_remove("HEURSYNTH_SERVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    dev: PathBuf,
    test: PathBuf,
}

fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let dev = root.join("dev.json");
    let test = root.join("test.json");
    for (split, path, seed) in [("dev", &dev, "10"), ("test", &test, "20")] {
        let o = heursynth(&[
            "generate",
            "--domain",
            "euclidean-steiner",
            "--split",
            split,
            "--count",
            "2",
            "--seed",
            seed,
            "--with-references",
            "--out",
            p(path),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    Workspace {
        _tmp: tmp,
        root,
        dev,
        test,
    }
}

fn review(runs: usize) -> Vec<String> {
    (0..runs)
        .flat_map(|_| {
            [
                r#"{"is_bug": false, "summary": "ok"}"#.to_string(),
                r#"{"is_bug": false, "summary": "ok"}"#.to_string(),
                json!({"algorithmic design": "d", "failure and stagnation reason": "f", "constraint": "c"}).to_string(),
            ]
        })
        .collect()
}

/// Budget 2 and depth 2, i.e. one branch of two executions per run.
fn write_config(dir: &Path, gens: Vec<String>, review: Vec<String>, runtime: Value) -> PathBuf {
    let cfg = json!({
        "search": {"budget": 2, "depth_cap": 2, "timeout_s": 5.0, "rng_seed": 3, "stop_rule": "never"},
        "roles": {
            "clients": {
                "gen": {"kind": "scripted", "model": "g", "responses": gens},
                "review": {"kind": "scripted", "model": "r", "responses": review}
            },
            "bindings": {"propose": "gen", "repair": "gen", "improve": "gen", "critic": "review", "reflect": "review"}
        },
        "sandbox": runtime
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn simulated_gens(runs: usize) -> Vec<String> {
    (0..runs)
        .flat_map(|_| {
            [
                "Sketch: empty.\n```text\nyield 0.1 {\"steiner_points\": []}\n```".to_string(),
                "Sketch: optimum.\n```text\nyield-oracle 0.1\n```".to_string(),
            ]
        })
        .collect()
}

fn simulated() -> Value {
    json!({"runtime": {"kind": "simulated"}})
}

#[test]
fn synthesize_report_grade_stability() {
    let ws = workspace();
    let cfg = write_config(&ws.root, simulated_gens(1), review(1), simulated());
    let run = ws.root.join("run");
    let o = heursynth(&[
        "synthesize",
        "--config",
        p(&cfg),
        "--dev",
        p(&ws.dev),
        "--test",
        p(&ws.test),
        "--domain",
        "euclidean-steiner",
        "--out",
        p(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for needle in ["run run written", "selected r000", "executions 2 in 1 branches", "test mean score", "test mean valid"] {
        assert!(out.contains(needle), "missing {needle:?} in {out}");
    }
    for f in ["final.json", "records.jsonl", "trace.jsonl", "ledger.jsonl", "convergence.csv", "test_results.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let o = heursynth(&["report", "--run", p(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("report/cost.csv").is_file());
    assert_eq!(stdout(&o).lines().count(), 4);

    let solution = ws.root.join("solution.json");
    std::fs::write(&solution, r#"{"steiner_points": []}"#).unwrap();
    let dataset: Value = serde_json::from_str(&std::fs::read_to_string(&ws.dev).unwrap()).unwrap();
    let id = dataset["instances"][0]["instance_id"].as_str().unwrap().to_string();
    let o = heursynth(&[
        "grade",
        "--domain",
        "euclidean-steiner",
        "--instance",
        p(&ws.dev),
        "--instance-id",
        &id,
        "--solution",
        p(&solution),
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("feasible\nobjective 0\nscore "), "{out}");

    let o = heursynth(&[
        "grade",
        "--domain",
        "euclidean-steiner",
        "--instance",
        p(&ws.dev),
        "--solution",
        p(&solution),
    ]);
    assert_eq!(code(&o), 1);

    let cfg3 = write_config(&ws.root, simulated_gens(3), review(3), simulated());
    let o = heursynth(&[
        "stability",
        "--config",
        p(&cfg3),
        "--dev",
        p(&ws.dev),
        "--test",
        p(&ws.test),
        "--runs",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("run ")).count(), 3);
    assert!(out.lines().any(|l| l.starts_with("score mean ") && l.ends_with(" stdev 0")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("valid mean 1.0000 stdev 0")), "{out}");
}

#[test]
fn subprocess_runtime_end_to_end() {
    let ws = workspace();
    let line = r#"echo '{"seq": 1, "solution": {"steiner_points": []}}'"#;
    let gens = vec![
        "Sketch: crash.\n```sh\necho failing >&2\nexit 2\n```".to_string(),
        format!("Sketch: empty set.\n```sh\n{line}\n```"),
    ];
    let runtime = json!({
        "runtime": {"kind": "subprocess", "command": ["sh"]},
        "solver_file_name": "solver.sh",
        "isolate_network": false,
        "memory_limit_mb": null
    });
    let cfg = write_config(&ws.root, gens, review(1), runtime);
    let run = ws.root.join("sh-run");
    let o = heursynth(&[
        "synthesize",
        "--config",
        p(&cfg),
        "--dev",
        p(&ws.dev),
        "--test",
        p(&ws.test),
        "--out",
        p(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fin: Value = serde_json::from_str(&std::fs::read_to_string(run.join("final.json")).unwrap()).unwrap();
    assert_eq!(fin["selected_record_id"], "r0002");
    assert_eq!(fin["test_mean_valid"], 1.0);
    let records = std::fs::read_to_string(run.join("records.jsonl")).unwrap();
    assert!(records.lines().next().unwrap().contains("failing"));
}

#[test]
fn failures_map_to_exit_codes() {
    let ws = workspace();
    let cfg = write_config(&ws.root, simulated_gens(1), review(1), simulated());

    let missing = ws.root.join("absent.json");
    let o = heursynth(&[
        "synthesize",
        "--config",
        p(&cfg),
        "--dev",
        p(&missing),
        "--test",
        p(&ws.test),
        "--out",
        p(&ws.root.join("never")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(!ws.root.join("never").exists());

    let o = heursynth(&[
        "synthesize",
        "--config",
        p(&cfg),
        "--dev",
        p(&ws.dev),
        "--test",
        p(&ws.test),
        "--domain",
        "pvrp",
        "--out",
        p(&ws.root.join("never")),
    ]);
    assert_eq!(code(&o), 1);

    assert_eq!(code(&heursynth(&["frobnicate"])), 1);
    assert_eq!(code(&heursynth(&["--help"])), 0);

    // one generation reply for a two-execution budget: the run aborts after persisting
    let short = write_config(&ws.root, simulated_gens(1)[..1].to_vec(), review(1), simulated());
    let partial = ws.root.join("partial");
    let o = heursynth(&[
        "synthesize",
        "--config",
        p(&short),
        "--dev",
        p(&ws.dev),
        "--test",
        p(&ws.test),
        "--out",
        p(&partial),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let fin: Value = serde_json::from_str(&std::fs::read_to_string(partial.join("final.json")).unwrap()).unwrap();
    assert_eq!(fin["status"], "aborted");
    assert_eq!(code(&heursynth(&["report", "--run", p(&partial)])), 0);
}
