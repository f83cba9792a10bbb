//! CSV and JSON reports derived from a run directory alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{convergence_rows, ArtifactError, RunArtifact, RunStatus, CONVERGENCE_HEADER};
use crate::evaluate::difficulty::{difficulty_aircraft, difficulty_pvrp, tercile_bins, DifficultyError};
use crate::operators::{LedgerTotals, Role};
use crate::problem::{Dataset, DomainId, Payload};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("difficulty proxy failed on {instance_id}: {source}")]
    Difficulty {
        instance_id: String,
        #[source]
        source: DifficultyError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Difficulty proxy for one instance; `None` for domains without a proxy.
pub fn difficulty_of(payload: &Payload) -> Option<Result<f64, DifficultyError>> {
    match payload {
        Payload::AircraftLanding(p) => Some(difficulty_aircraft(p)),
        Payload::PeriodicVehicleRouting(p) => Some(difficulty_pvrp(p)),
        _ => None,
    }
}

pub fn domain_has_difficulty(domain: DomainId) -> bool {
    matches!(domain, DomainId::AircraftLanding | DomainId::PeriodicVehicleRouting)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub instance_id: String,
    pub difficulty: f64,
    pub bin: usize,
}

/// Proxy values and tercile bins for every instance, in dataset order.
pub fn difficulty_rows(dataset: &Dataset) -> Result<Option<Vec<DifficultyRow>>, ReportError> {
    if !domain_has_difficulty(dataset.domain) {
        return Ok(None);
    }
    let mut values = Vec::with_capacity(dataset.len());
    for inst in &dataset.instances {
        let v = difficulty_of(&inst.payload)
            .expect("domain has a proxy")
            .map_err(|source| ReportError::Difficulty {
                instance_id: inst.instance_id.clone(),
                source,
            })?;
        values.push(v);
    }
    let bins = tercile_bins(&values);
    Ok(Some(
        dataset
            .instances
            .iter()
            .zip(values.iter().zip(bins))
            .map(|(inst, (&difficulty, bin))| DifficultyRow {
                instance_id: inst.instance_id.clone(),
                difficulty,
                bin,
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: usize,
    pub count: usize,
    pub mean_valid: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub role: Role,
    pub model_name: String,
    #[serde(flatten)]
    pub totals: LedgerTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub run_id: String,
    pub domain: DomainId,
    pub status: Option<RunStatus>,
    pub executions: usize,
    pub branches: usize,
    pub global_entries: usize,
    pub global_token_estimate: usize,
    pub selected_record_id: Option<String>,
    pub dev_valid: Option<u8>,
    pub dev_score: Option<f64>,
    pub test_mean_valid: Option<f64>,
    pub test_mean_score: Option<f64>,
    pub cost_by_role: Vec<CostRow>,
    pub cost_total: LedgerTotals,
    pub difficulty_bins: Option<Vec<BinSummary>>,
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: ReportSummary,
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn test_scores_csv(artifact: &RunArtifact) -> Vec<u8> {
    let rows = artifact.test_results.iter().flat_map(|t| &t.outcomes).map(|o| {
        let violation = o
            .evaluation
            .as_ref()
            .and_then(|e| e.violation())
            .map(|v| v.constraint.as_str().to_string())
            .unwrap_or_default();
        vec![
            o.outcome.instance_id.clone(),
            o.score.valid.to_string(),
            o.score.score.to_string(),
            o.outcome.status.as_str().to_string(),
            violation,
        ]
    });
    csv_bytes(&["instance_id", "valid", "score", "status", "violation"], rows)
}

pub fn convergence_csv(artifact: &RunArtifact) -> Vec<u8> {
    let mut out = CONVERGENCE_HEADER.to_string();
    for row in convergence_rows(&artifact.records) {
        out.push_str(&row.to_csv_line());
    }
    out.into_bytes()
}

/// Totals per (role, model) in role order; the grand total sums entries directly.
pub fn cost_rows(artifact: &RunArtifact) -> (Vec<CostRow>, LedgerTotals) {
    let mut by: BTreeMap<(Role, &str), LedgerTotals> = BTreeMap::new();
    for e in &artifact.ledger {
        by.entry((e.role, e.model_name.as_str())).or_default().add(e);
    }
    let rows = by
        .into_iter()
        .map(|((role, model), totals)| CostRow {
            role,
            model_name: model.to_string(),
            totals,
        })
        .collect();
    (rows, LedgerTotals::of(&artifact.ledger))
}

pub fn cost_csv(rows: &[CostRow], total: &LedgerTotals) -> Vec<u8> {
    let line = |role: &str, model: &str, t: &LedgerTotals| {
        vec![
            role.to_string(),
            model.to_string(),
            t.calls.to_string(),
            t.input_tokens.to_string(),
            t.output_tokens.to_string(),
            t.wall_time.to_string(),
            t.cost.to_string(),
        ]
    };
    let body = rows
        .iter()
        .map(|r| line(r.role.as_str(), &r.model_name, &r.totals))
        .chain(std::iter::once(line("total", "", total)));
    csv_bytes(
        &["role", "model_name", "calls", "input_tokens", "output_tokens", "wall_time", "cost"],
        body,
    )
}

/// Difficulty rows joined with the test outcomes, and per-bin means.
fn difficulty_report(artifact: &RunArtifact) -> Option<(Vec<u8>, Vec<BinSummary>)> {
    let rows = match difficulty_rows(&artifact.test) {
        Ok(Some(rows)) => rows,
        Ok(None) => return None,
        // a degenerate instance leaves the proxy undefined; the other reports still stand
        Err(e) => {
            tracing::warn!(error = %e, "skipping difficulty report");
            return None;
        }
    };
    let scores: BTreeMap<&str, (u8, f64)> = artifact
        .test_results
        .iter()
        .flat_map(|t| &t.outcomes)
        .map(|o| (o.outcome.instance_id.as_str(), (o.score.valid, o.score.score)))
        .collect();
    let mut bins: Vec<BinSummary> = (0..3)
        .map(|bin| BinSummary {
            bin,
            count: 0,
            mean_valid: 0.0,
            mean_score: 0.0,
        })
        .collect();
    let mut sums = [(0.0f64, 0.0f64); 3];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let s = scores.get(r.instance_id.as_str());
            bins[r.bin].count += 1;
            if let Some((v, f)) = s {
                sums[r.bin].0 += *v as f64;
                sums[r.bin].1 += f;
            }
            vec![
                r.instance_id.clone(),
                r.difficulty.to_string(),
                r.bin.to_string(),
                s.map(|(v, _)| v.to_string()).unwrap_or_default(),
                s.map(|(_, f)| f.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    if !scores.is_empty() {
        for (b, (v, f)) in bins.iter_mut().zip(sums) {
            if b.count > 0 {
                b.mean_valid = v / b.count as f64;
                b.mean_score = f / b.count as f64;
            }
        }
    }
    Some((csv_bytes(&["instance_id", "difficulty", "bin", "valid", "score"], body), bins))
}

pub fn summarize(artifact: &RunArtifact, bins: Option<Vec<BinSummary>>) -> ReportSummary {
    let (cost_by_role, cost_total) = cost_rows(artifact);
    let selected = artifact
        .test_results
        .as_ref()
        .map(|t| t.selected_record_id.clone())
        .or_else(|| artifact.final_summary.as_ref().and_then(|f| f.selected_record_id.clone()));
    let selected_record = selected
        .as_deref()
        .and_then(|id| artifact.records.iter().find(|r| r.record_id == id));
    let mut branches: Vec<u32> = artifact.records.iter().map(|r| r.branch_id).collect();
    branches.dedup();
    ReportSummary {
        run_id: artifact.meta.run_id.clone(),
        domain: artifact.meta.domain,
        status: artifact.final_summary.as_ref().map(|f| f.status),
        executions: artifact.records.len(),
        branches: branches.len(),
        global_entries: artifact.global_memory.len(),
        global_token_estimate: artifact.global_memory.token_estimate(),
        selected_record_id: selected,
        dev_valid: selected_record.map(|r| r.valid),
        dev_score: selected_record.map(|r| r.score),
        test_mean_valid: artifact.test_results.as_ref().map(|t| t.mean_valid),
        test_mean_score: artifact.test_results.as_ref().map(|t| t.mean_score),
        cost_by_role,
        cost_total,
        difficulty_bins: bins,
    }
}

/// Writes every report file into `out_dir`; deterministic for a given artifact.
pub fn write_report(artifact: &RunArtifact, out_dir: &Path) -> Result<ReportFiles, ReportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(io(&path))?;
        files.push(name.to_string());
        Ok(())
    };
    put("test_scores.csv", &test_scores_csv(artifact))?;
    put("convergence.csv", &convergence_csv(artifact))?;
    let (rows, total) = cost_rows(artifact);
    put("cost.csv", &cost_csv(&rows, &total))?;
    let bins = match difficulty_report(artifact) {
        Some((bytes, bins)) => {
            put("difficulty.csv", &bytes)?;
            Some(bins)
        }
        None => None,
    };
    let summary = summarize(artifact, bins);
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    put("summary.json", json.as_bytes())?;
    Ok(ReportFiles {
        out_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}
