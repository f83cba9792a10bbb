//! Fixtures shared by the core integration suites: Steiner datasets with
//! oracle references, scripted model replies and event-script solvers.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use heursynth_core::config::RunConfig;
use heursynth_core::evaluate::oracle::attach_oracle_references;
use heursynth_core::problem::generate_instance;
use heursynth_core::search::StopRule;
use heursynth_core::{Dataset, DomainId, SizeClass, Split};

/// Prints a verdict line past the test harness's output capture.
pub fn verdict(name: &str, ok: bool, detail: &str) -> bool {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Small Steiner instances whose oracle reference is positive, so an empty
/// Steiner set scores 0 and the oracle optimum scores 1.
pub fn steiner_dataset(split: Split, count: usize, base_seed: u64) -> Dataset {
    let mut instances = Vec::new();
    let mut seed = base_seed;
    while instances.len() < count {
        let inst = generate_instance(DomainId::EuclideanSteiner, SizeClass::Small, seed);
        seed += 1;
        let ds = Dataset {
            domain: DomainId::EuclideanSteiner,
            split,
            instances: vec![inst],
        };
        let inst = attach_oracle_references(ds).expect("small instances are enumerable").instances.remove(0);
        if inst.reference_objective.is_some_and(|r| r > 1e-6) {
            instances.push(inst);
        }
    }
    Dataset {
        domain: DomainId::EuclideanSteiner,
        split,
        instances,
    }
}

pub fn ids(ds: &Dataset) -> Vec<String> {
    ds.instances.iter().map(|i| i.instance_id.clone()).collect()
}

/// Event-script solvers for a two-instance dev set `[a, b]`.
pub mod solver {
    pub const EMPTY: &str = r#"{"steiner_points": []}"#;

    /// Valid, score 1 everywhere.
    pub fn full() -> String {
        "yield-oracle 0.1".into()
    }

    /// Valid, score 0.5: optimum on `a`, empty set on `b`.
    pub fn half(a: &str, b: &str) -> String {
        format!("yield-oracle 0.1 {a}\nyield-for {b} 0.2 {EMPTY}")
    }

    /// Valid, score 0.
    pub fn zero() -> String {
        format!("yield 0.1 {EMPTY}")
    }

    /// Invalid, score 0.5: optimum on `a`, nothing on `b`.
    pub fn partial(a: &str) -> String {
        format!("yield-oracle 0.1 {a}\nstderr 0.2 LOGMARK-partial no solution for the second instance")
    }

    /// Invalid, score 0: crashes before yielding.
    pub fn crash() -> String {
        "stderr 0.1 LOGMARK-crash Traceback: IndexError in solve\nexit 0.2 1".into()
    }
}

/// A generation reply: sketch, then the solver in a fence, tagged with a marker comment.
pub fn gen_reply(k: usize, code: &str) -> String {
    format!("Sketch-{k}: greedy insertion of candidate points, variant {k}.\n\n```text\n{code}\n# SOLVERCODE-{k}\n```\n")
}

pub fn critic_reply(k: usize) -> String {
    format!(r#"{{"is_bug": false, "summary": "Diagnosis-{k}: behaves as designed."}}"#)
}

pub fn reflect_reply(k: usize) -> String {
    json!({
        "algorithmic design": format!("Design-{k}: point insertion guided by triangle angles."),
        "failure and stagnation reason": format!("Failure-{k}: improvements stalled after the first insertion."),
        "constraint": format!("Constraint-{k}: never add points that lengthen the tree."),
    })
    .to_string()
}

pub struct Script {
    pub generations: Vec<String>,
    pub critics: Vec<String>,
    pub reflections: Vec<String>,
}

impl Script {
    /// Canned critic and reflection replies in the quantities a run can consume.
    pub fn canned(generations: Vec<String>, reflections: usize) -> Self {
        let n = generations.len();
        Script {
            critics: (1..=n).map(critic_reply).collect(),
            reflections: (1..=reflections).map(reflect_reply).collect(),
            generations,
        }
    }
}

pub fn config_value(budget: u32, depth_cap: u32, stop_rule: StopRule, script: &Script) -> Value {
    json!({
        "search": {
            "budget": budget,
            "depth_cap": depth_cap,
            "timeout_s": 10.0,
            "rng_seed": 7,
            "stop_rule": stop_rule,
            "parallelism": 2
        },
        "roles": {
            "clients": {
                "gen": {"kind": "scripted", "model": "gen-model", "responses": script.generations},
                "critic": {"kind": "scripted", "model": "review-model", "responses": script.critics},
                "reflect": {"kind": "scripted", "model": "review-model", "responses": script.reflections}
            },
            "bindings": {"propose": "gen", "repair": "gen", "improve": "gen", "critic": "critic", "reflect": "reflect"}
        },
        "sandbox": {"runtime": {"kind": "simulated"}, "isolate_network": false, "memory_limit_mb": null},
        "rates": {"gen-model": {"input": 0.000002, "output": 0.000008}, "review-model": {"input": 0.000001, "output": 0.000002}}
    })
}

pub fn config(budget: u32, depth_cap: u32, stop_rule: StopRule, script: &Script) -> RunConfig {
    RunConfig::from_value(config_value(budget, depth_cap, stop_rule, script)).expect("fixture config is valid")
}

/// Every file under `dir`, relative path to bytes.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
