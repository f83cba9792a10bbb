use std::time::Duration;

use serde_json::{json, Value};

use heursynth_client::{Client, ClientError};
use heursynth_core::api::{
    DifficultyRequest, ErrorKind, GenerateRequest, GradeRequest, JobResult, JobState, ReportRequest, StabilityRequest,
    SynthesizeRequest,
};
use heursynth_core::{DomainId, SizeClass, Split};

async fn start() -> (Client, String) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    tokio::spawn(heursynth_server::serve(listener));
    (Client::new(&base).unwrap().with_poll_interval(Duration::from_millis(20)), base)
}

async fn dataset(client: &Client, split: Split, count: usize, seed: u64) -> Value {
    client
        .generate(&GenerateRequest {
            domain: DomainId::EuclideanSteiner,
            size: SizeClass::Small,
            split,
            count,
            base_seed: seed,
            with_references: true,
        })
        .await
        .unwrap()
        .dataset
}

fn fenced(code: &str) -> String {
    format!("Sketch: place the oracle points.\n```text\n{code}\n```\n")
}

/// Budget 2, depth 2: one branch that proposes an empty set then improves to the optimum.
fn run_config(runs: usize) -> Value {
    let gens: Vec<String> = (0..runs)
        .flat_map(|_| [fenced(r#"yield 0.1 {"steiner_points": []}"#), fenced("yield-oracle 0.1")])
        .collect();
    // critic and reflect share one client: two diagnoses then one branch summary per run
    let review: Vec<String> = (0..runs)
        .flat_map(|_| {
            [
                r#"{"is_bug": false, "summary": "ok"}"#.to_string(),
                r#"{"is_bug": false, "summary": "ok"}"#.to_string(),
                json!({"algorithmic design": "d", "failure and stagnation reason": "f", "constraint": "c"}).to_string(),
            ]
        })
        .collect();
    json!({
        "search": {"budget": 2, "depth_cap": 2, "timeout_s": 5.0, "rng_seed": 1, "stop_rule": "never"},
        "roles": {
            "clients": {
                "gen": {"kind": "scripted", "model": "g", "responses": gens},
                "critic": {"kind": "scripted", "model": "c", "responses": review}
            },
            "bindings": {"propose": "gen", "repair": "gen", "improve": "gen", "critic": "critic", "reflect": "critic"}
        },
        "sandbox": {"runtime": {"kind": "simulated"}}
    })
}

fn kind(e: &ClientError) -> ErrorKind {
    e.kind()
}

#[tokio::test(flavor = "multi_thread")]
async fn health_generate_grade_and_difficulty() {
    let (client, _) = start().await;
    assert_eq!(client.health().await.unwrap().status, "ok");

    let ds = dataset(&client, Split::Dev, 2, 5).await;
    let inst = ds["instances"][0].clone();
    assert!(inst["reference_objective"].is_number());

    let graded = client
        .grade(&GradeRequest {
            domain: DomainId::EuclideanSteiner,
            instance: inst.clone(),
            solution: json!({"steiner_points": []}),
        })
        .await
        .unwrap();
    assert_eq!(graded.outcome.objective(), Some(0.0));
    assert!(graded.score.is_some());

    let bad = client
        .grade(&GradeRequest {
            domain: DomainId::EuclideanSteiner,
            instance: inst,
            solution: json!({"wrong": 1}),
        })
        .await
        .unwrap();
    assert!(bad.outcome.violation().is_some());

    let aircraft = client
        .generate(&GenerateRequest {
            domain: DomainId::AircraftLanding,
            size: SizeClass::Medium,
            split: Split::Test,
            count: 3,
            base_seed: 0,
            with_references: false,
        })
        .await
        .unwrap()
        .dataset;
    let rows = client.difficulty(&DifficultyRequest { dataset: aircraft }).await.unwrap().rows;
    assert_eq!(rows.len(), 3);

    let err = client.difficulty(&DifficultyRequest { dataset: ds }).await.unwrap_err();
    assert_eq!(kind(&err), ErrorKind::Usage);
}

#[tokio::test(flavor = "multi_thread")]
async fn run_job_then_report() {
    let (client, _) = start().await;
    let dev = dataset(&client, Split::Dev, 2, 10).await;
    let test = dataset(&client, Split::Test, 2, 20).await;
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run-a");

    let job = client
        .submit_run(&SynthesizeRequest {
            config: run_config(1),
            dev: dev.clone(),
            test: test.clone(),
            out_dir: out_dir.clone(),
            run_id: None,
        })
        .await
        .unwrap();
    let status = client.wait_job(&job.job_id).await.unwrap();
    assert_eq!(status.state, JobState::Succeeded, "{:?}", status.error);
    let Some(JobResult::Synthesize(summary)) = status.result else {
        panic!("wrong result kind");
    };
    assert_eq!(summary.run_id, "run-a");
    assert_eq!((summary.dev_valid, summary.dev_score), (1, 1.0));
    assert_eq!(summary.executions, 2);
    assert_eq!(summary.test_mean_valid, 1.0);

    let files = client
        .report(&ReportRequest {
            artifact_dir: out_dir.clone(),
            out_dir: None,
        })
        .await
        .unwrap();
    assert_eq!(files.out_dir, out_dir.join("report"));
    assert!(out_dir.join("report/summary.json").is_file());

    // a second run into the same directory fails inside the job
    let again = client
        .submit_run(&SynthesizeRequest {
            config: run_config(1),
            dev,
            test,
            out_dir,
            run_id: Some("again".into()),
        })
        .await
        .unwrap();
    let status = client.wait_job(&again.job_id).await.unwrap();
    assert_eq!(status.state, JobState::Failed);
    assert_eq!(status.error.unwrap().kind, ErrorKind::Runtime);
}

#[tokio::test(flavor = "multi_thread")]
async fn stability_job() {
    let (client, _) = start().await;
    let dev = dataset(&client, Split::Dev, 2, 10).await;
    let test = dataset(&client, Split::Test, 2, 20).await;
    let job = client
        .submit_stability(&StabilityRequest {
            config: run_config(2),
            dev,
            test,
            run_count: 2,
        })
        .await
        .unwrap();
    let status = client.wait_job(&job.job_id).await.unwrap();
    let Some(JobResult::Stability(s)) = status.result else {
        panic!("{:?}", status.error);
    };
    assert_eq!(s.runs.len(), 2);
    assert_eq!(s.stdev_score, 0.0);
}

#[tokio::test(flavor = "multi_thread")]
async fn request_errors_are_typed() {
    let (client, base) = start().await;
    let err = client.job("job-404").await.unwrap_err();
    assert_eq!(kind(&err), ErrorKind::NotFound);

    let dev = dataset(&client, Split::Dev, 1, 10).await;
    let test = dataset(&client, Split::Test, 1, 20).await;
    let relative = client
        .submit_run(&SynthesizeRequest {
            config: run_config(1),
            dev: dev.clone(),
            test: test.clone(),
            out_dir: "relative/dir".into(),
            run_id: None,
        })
        .await
        .unwrap_err();
    assert_eq!(kind(&relative), ErrorKind::Usage);

    let swapped = client
        .submit_run(&SynthesizeRequest {
            config: run_config(1),
            dev: test,
            test: dev,
            out_dir: std::env::temp_dir().join("never-created"),
            run_id: None,
        })
        .await
        .unwrap_err();
    assert_eq!(kind(&swapped), ErrorKind::Usage);

    let bad_config = client
        .submit_stability(&StabilityRequest {
            config: json!({"search": {"budget": "many"}}),
            dev: json!({}),
            test: json!({}),
            run_count: 2,
        })
        .await
        .unwrap_err();
    assert_eq!(kind(&bad_config), ErrorKind::Usage);

    let raw = reqwest::Client::new()
        .post(format!("{base}v1/runs"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status(), 400);
    let body: Value = raw.json().await.unwrap();
    assert_eq!(body["kind"], "usage");
}
