//! Per-branch records, the cross-branch reflection list and the solver store.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{dataset_metrics, InstanceScore};
use crate::executor::{EvaluatedOutcome, ExecutionReport};

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("record for branch {got} appended to branch {expected}")]
    BranchMismatch { expected: u32, got: u32 },
    #[error("record id {0} already exists")]
    DuplicateId(String),
    #[error("record {record_id} is inconsistent: {reason}")]
    Inconsistent { record_id: String, reason: String },
    #[error("branch has no valid record to improve")]
    NoValidRecord,
    #[error("repair parent requested although the branch has a valid record")]
    HasValidRecord,
    #[error("no records to select from")]
    Empty,
    #[error("branch {0} already has a global memory entry")]
    DuplicateBranch(u32),
    #[error("global memory field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("solver for {0} was already stored")]
    ArtifactExists(String),
    #[error("no stored solver at {0}")]
    ArtifactMissing(String),
}

/// The critic's verdict on one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticDiagnostic {
    pub is_bug: bool,
    pub summary: String,
    /// True when the critic's reply was unusable and this was derived from the logs.
    #[serde(default)]
    pub fallback: bool,
}

/// One executed candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: String,
    pub branch_id: u32,
    pub depth: u32,
    pub sketch: String,
    pub diagnostic: CriticDiagnostic,
    pub valid: u8,
    pub score: f64,
    pub outcomes: Vec<EvaluatedOutcome>,
    pub parent_record_id: Option<String>,
    pub solver_ref: String,
}

impl Record {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        record_id: String,
        branch_id: u32,
        depth: u32,
        sketch: String,
        diagnostic: CriticDiagnostic,
        report: ExecutionReport,
        parent_record_id: Option<String>,
        solver_ref: String,
    ) -> Self {
        Record {
            record_id,
            branch_id,
            depth,
            sketch,
            diagnostic,
            valid: report.valid,
            score: report.score,
            outcomes: report.outcomes,
            parent_record_id,
            solver_ref,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.valid == 1
    }

    /// Recomputes validity and score from the outcomes and compares exactly.
    pub fn check(&self) -> Result<(), MemoryError> {
        let bad = |reason: String| MemoryError::Inconsistent {
            record_id: self.record_id.clone(),
            reason,
        };
        if (self.depth == 1) != self.parent_record_id.is_none() {
            return Err(bad(format!("depth {} with parent {:?}", self.depth, self.parent_record_id)));
        }
        let scores: Vec<InstanceScore> = self.outcomes.iter().map(|o| o.score).collect();
        let metrics = dataset_metrics(&scores).map_err(|e| bad(e.to_string()))?;
        if metrics.mean_score.to_bits() != self.score.to_bits() {
            return Err(bad(format!("score {} but outcomes average {}", self.score, metrics.mean_score)));
        }
        let valid = self.outcomes.iter().all(EvaluatedOutcome::is_valid) as u8;
        if valid != self.valid {
            return Err(bad(format!("valid {} but outcomes say {valid}", self.valid)));
        }
        Ok(())
    }
}

/// Records of one branch in append order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchLocalMemory {
    pub branch_id: u32,
    records: Vec<Record>,
}

impl BranchLocalMemory {
    pub fn new(branch_id: u32) -> Self {
        BranchLocalMemory {
            branch_id,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn get(&self, record_id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.record_id == record_id)
    }

    pub fn has_valid(&self) -> bool {
        self.records.iter().any(Record::is_valid)
    }

    pub fn append_record(&mut self, record: Record) -> Result<(), MemoryError> {
        if record.branch_id != self.branch_id {
            return Err(MemoryError::BranchMismatch {
                expected: self.branch_id,
                got: record.branch_id,
            });
        }
        if self.get(&record.record_id).is_some() {
            return Err(MemoryError::DuplicateId(record.record_id));
        }
        record.check()?;
        if let Some(parent) = &record.parent_record_id {
            if self.get(parent).is_none() {
                return Err(MemoryError::Inconsistent {
                    record_id: record.record_id.clone(),
                    reason: format!("parent {parent} is not in branch {}", self.branch_id),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Samples a parent with probability proportional to score, uniformly when
    /// every score is zero. Only meaningful while no record is valid.
    pub fn select_repair_parent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&Record, MemoryError> {
        if self.records.is_empty() {
            return Err(MemoryError::Empty);
        }
        if self.has_valid() {
            return Err(MemoryError::HasValidRecord);
        }
        let total: f64 = self.records.iter().map(|r| r.score).sum();
        if total <= 0.0 {
            return Ok(&self.records[rng.gen_range(0..self.records.len())]);
        }
        let mut u = rng.gen::<f64>() * total;
        for r in &self.records {
            if r.score > 0.0 && u < r.score {
                return Ok(r);
            }
            u -= r.score;
        }
        // rounding can leave a sliver past the last positive weight
        Ok(self.records.iter().rev().find(|r| r.score > 0.0).expect("total is positive"))
    }

    /// Highest-scoring valid record; the earliest wins ties.
    pub fn select_improve_parent(&self) -> Result<&Record, MemoryError> {
        best_of(self.records.iter().filter(|r| r.is_valid())).ok_or(MemoryError::NoValidRecord)
    }
}

fn best_of<'a>(records: impl Iterator<Item = &'a Record>) -> Option<&'a Record> {
    let mut best: Option<&Record> = None;
    for r in records {
        if best.is_none_or(|b| r.score > b.score) {
            best = Some(r);
        }
    }
    best
}

/// Best valid record of the run, falling back to the best of all records.
/// Branch order then append order is creation order, so earlier records win ties.
pub fn final_selection(branches: &[BranchLocalMemory]) -> Result<&Record, MemoryError> {
    let all = || branches.iter().flat_map(|b| b.records.iter());
    best_of(all().filter(|r| r.is_valid()))
        .or_else(|| best_of(all()))
        .ok_or(MemoryError::Empty)
}

/// Rough token count: whitespace-separated words.
pub fn estimate_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lessons distilled from one finished branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalMemoryEntry {
    pub branch_id: u32,
    pub algorithmic_design: String,
    pub failure_modes: String,
    pub avoidance_directives: String,
    pub token_estimate: usize,
}

impl GlobalMemoryEntry {
    pub fn new(
        branch_id: u32,
        algorithmic_design: String,
        failure_modes: String,
        avoidance_directives: String,
    ) -> Result<Self, MemoryError> {
        for (name, v) in [
            ("algorithmic_design", &algorithmic_design),
            ("failure_modes", &failure_modes),
            ("avoidance_directives", &avoidance_directives),
        ] {
            if v.trim().is_empty() {
                return Err(MemoryError::EmptyField(name));
            }
        }
        let token_estimate =
            estimate_tokens(&algorithmic_design) + estimate_tokens(&failure_modes) + estimate_tokens(&avoidance_directives);
        Ok(GlobalMemoryEntry {
            branch_id,
            algorithmic_design,
            failure_modes,
            avoidance_directives,
            token_estimate,
        })
    }
}

/// At most one entry per branch, in the order branches finished.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalMemory {
    pub entries: Vec<GlobalMemoryEntry>,
}

impl GlobalMemory {
    pub fn add_entry(&mut self, entry: GlobalMemoryEntry) -> Result<(), MemoryError> {
        if self.entries.iter().any(|e| e.branch_id == entry.branch_id) {
            return Err(MemoryError::DuplicateBranch(entry.branch_id));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn token_estimate(&self) -> usize {
        self.entries.iter().map(|e| e.token_estimate).sum()
    }
}

/// Write-once solver sources keyed by `solvers/<record_id>`.
#[derive(Debug, Clone, Default)]
pub struct ArtifactStore {
    sources: BTreeMap<String, String>,
    ids: HashSet<String>,
}

impl ArtifactStore {
    pub fn solver_ref(record_id: &str) -> String {
        format!("solvers/{record_id}")
    }

    pub fn put(&mut self, record_id: &str, source: &str) -> Result<String, MemoryError> {
        if !self.ids.insert(record_id.to_string()) {
            return Err(MemoryError::ArtifactExists(record_id.to_string()));
        }
        let key = Self::solver_ref(record_id);
        self.sources.insert(key.clone(), source.to_string());
        Ok(key)
    }

    pub fn get(&self, solver_ref: &str) -> Result<&str, MemoryError> {
        self.sources
            .get(solver_ref)
            .map(String::as_str)
            .ok_or_else(|| MemoryError::ArtifactMissing(solver_ref.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::executor::{ExecutionOutcome, Status};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn outcome(score: f64, valid: bool) -> EvaluatedOutcome {
        EvaluatedOutcome {
            outcome: ExecutionOutcome {
                instance_id: "i".into(),
                status: if valid { Status::Solved } else { Status::Crashed },
                last_solution: None,
                yield_count: valid as u32,
                stdout_log: String::new(),
                stderr_log: String::new(),
                wall_time: 0.0,
            },
            evaluation: valid.then(|| crate::evaluate::RawOutcome::feasible(1.0)),
            score: InstanceScore {
                valid: valid as u8,
                score,
            },
        }
    }

    /// A single-instance record with the given score and validity.
    pub(crate) fn record(id: &str, branch: u32, depth: u32, score: f64, valid: bool, parent: Option<&str>) -> Record {
        let report = ExecutionReport::from_outcomes(vec![outcome(score, valid)]).unwrap();
        Record::new(
            id.into(),
            branch,
            depth,
            format!("sketch {id}"),
            CriticDiagnostic {
                is_bug: !valid,
                summary: String::new(),
                fallback: false,
            },
            report,
            parent.map(String::from),
            ArtifactStore::solver_ref(id),
        )
    }

    #[test]
    fn append_checks() {
        let mut m = BranchLocalMemory::new(1);
        m.append_record(record("a", 1, 1, 0.5, true, None)).unwrap();
        assert_eq!(
            m.append_record(record("b", 2, 1, 0.5, true, None)),
            Err(MemoryError::BranchMismatch { expected: 1, got: 2 })
        );
        assert_eq!(
            m.append_record(record("a", 1, 2, 0.5, true, Some("a"))),
            Err(MemoryError::DuplicateId("a".into()))
        );
        let mut tampered = record("c", 1, 2, 0.5, true, Some("a"));
        tampered.score = 0.7;
        assert!(matches!(m.append_record(tampered), Err(MemoryError::Inconsistent { .. })));
        assert!(matches!(
            m.append_record(record("d", 1, 2, 0.5, true, Some("zz"))),
            Err(MemoryError::Inconsistent { .. })
        ));
    }

    #[test]
    fn improve_parent_prefers_earliest_best_valid() {
        let mut m = BranchLocalMemory::new(1);
        m.append_record(record("a", 1, 1, 0.9, false, None)).unwrap();
        assert_eq!(m.select_improve_parent(), Err(MemoryError::NoValidRecord));
        m.append_record(record("b", 1, 2, 0.4, true, Some("a"))).unwrap();
        m.append_record(record("c", 1, 3, 0.6, true, Some("b"))).unwrap();
        m.append_record(record("d", 1, 4, 0.6, true, Some("c"))).unwrap();
        assert_eq!(m.select_improve_parent().unwrap().record_id, "c");
        assert_eq!(
            m.select_repair_parent(&mut ChaCha8Rng::seed_from_u64(0)).unwrap_err(),
            MemoryError::HasValidRecord
        );
    }

    #[test]
    fn final_selection_falls_back_to_invalid() {
        let mut a = BranchLocalMemory::new(1);
        a.append_record(record("a", 1, 1, 0.3, false, None)).unwrap();
        let mut b = BranchLocalMemory::new(2);
        b.append_record(record("b", 2, 1, 0.3, false, None)).unwrap();
        assert_eq!(final_selection(&[a.clone(), b.clone()]).unwrap().record_id, "a");
        b.append_record(record("c", 2, 2, 0.1, true, Some("b"))).unwrap();
        assert_eq!(final_selection(&[a, b]).unwrap().record_id, "c");
        assert_eq!(final_selection(&[]), Err(MemoryError::Empty));
    }

    #[test]
    fn repair_parent_uniform_when_all_zero() {
        let mut m = BranchLocalMemory::new(1);
        m.append_record(record("a", 1, 1, 0.0, false, None)).unwrap();
        m.append_record(record("b", 1, 2, 0.0, false, Some("a"))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = HashSet::new();
        for _ in 0..50 {
            seen.insert(m.select_repair_parent(&mut rng).unwrap().record_id.clone());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn global_memory_rules() {
        let mut g = GlobalMemory::default();
        let e = GlobalMemoryEntry::new(1, "greedy insert".into(), "timeouts".into(), "cap loops".into()).unwrap();
        assert_eq!(e.token_estimate, 5);
        g.add_entry(e.clone()).unwrap();
        assert_eq!(g.add_entry(e), Err(MemoryError::DuplicateBranch(1)));
        assert_eq!(
            GlobalMemoryEntry::new(2, " ".into(), "x".into(), "y".into()),
            Err(MemoryError::EmptyField("algorithmic_design"))
        );
    }

    #[test]
    fn artifact_store_is_write_once() {
        let mut s = ArtifactStore::default();
        let key = s.put("r1", "print(1)").unwrap();
        assert_eq!(s.get(&key).unwrap(), "print(1)");
        assert_eq!(s.put("r1", "x"), Err(MemoryError::ArtifactExists("r1".into())));
        assert!(s.get("solvers/r2").is_err());
    }

    proptest! {
        #[test]
        fn repair_parent_never_picks_zero_weight_when_some_positive(
            scores in proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], 1..8),
            seed in any::<u64>(),
        ) {
            let mut m = BranchLocalMemory::new(1);
            for (i, s) in scores.iter().enumerate() {
                let parent = (i > 0).then(|| format!("r{}", i - 1));
                m.append_record(record(&format!("r{i}"), 1, i as u32 + 1, *s, false, parent.as_deref())).unwrap();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picked = m.select_repair_parent(&mut rng).unwrap();
            if scores.iter().any(|s| *s > 0.0) {
                prop_assert!(picked.score > 0.0);
            }
        }

        #[test]
        fn final_selection_is_valid_whenever_any_record_is(
            spec in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..10),
        ) {
            let mut m = BranchLocalMemory::new(1);
            for (i, (s, v)) in spec.iter().enumerate() {
                let parent = (i > 0).then(|| format!("r{}", i - 1));
                m.append_record(record(&format!("r{i}"), 1, i as u32 + 1, *s, *v, parent.as_deref())).unwrap();
            }
            let best = final_selection(std::slice::from_ref(&m)).unwrap();
            let any_valid = spec.iter().any(|(_, v)| *v);
            prop_assert_eq!(best.is_valid(), any_valid);
            let pool: Vec<f64> = spec.iter().filter(|(_, v)| *v || !any_valid).map(|(s, _)| *s).collect();
            let max = pool.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(best.score, max);
        }
    }
}
