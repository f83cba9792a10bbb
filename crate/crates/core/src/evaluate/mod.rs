//! Feasibility checking, raw objectives and normalized scoring.
//!
//! Every evaluator reports the first violated constraint in a fixed order:
//! structure, then per-entity checks, then pairwise checks, then aggregate
//! checks. Within each stage entities are visited in ascending id order.

mod aircraft;
mod container;
mod crew;
pub mod difficulty;
pub mod oracle;
mod pvrp;
mod rcsp;
mod steiner;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::problem::{CandidateSolution, Payload, ProblemInstance};

pub use aircraft::evaluate_aircraft;
pub use container::{evaluate_container, evaluate_container_weight};
pub use crew::evaluate_crew;
pub use pvrp::evaluate_pvrp;
pub use rcsp::evaluate_rcsp;
pub use steiner::{evaluate_steiner, mst_length};

/// Absolute tolerance for time and length comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// Named constraint families across all domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    Malformed,
    TimeWindow,
    Runway,
    Separation,
    ScheduleChoice,
    TourShape,
    Coverage,
    Capacity,
    VehicleCount,
    BoxType,
    ContainerId,
    Orientation,
    Bounds,
    Overlap,
    Count,
    Unsupported,
    LoadBearing,
    PathStart,
    PathEnd,
    MissingArc,
    Resource,
    TaskCoverage,
    CrewLimit,
    EmptyCrew,
    MissingTransition,
    DutyTime,
    TreeLength,
    Unsatisfiable,
}

impl Constraint {
    pub fn as_str(self) -> &'static str {
        match self {
            Constraint::Malformed => "malformed",
            Constraint::TimeWindow => "time-window",
            Constraint::Runway => "runway",
            Constraint::Separation => "separation",
            Constraint::ScheduleChoice => "schedule-choice",
            Constraint::TourShape => "tour-shape",
            Constraint::Coverage => "coverage",
            Constraint::Capacity => "capacity",
            Constraint::VehicleCount => "vehicle-count",
            Constraint::BoxType => "box-type",
            Constraint::ContainerId => "container-id",
            Constraint::Orientation => "orientation",
            Constraint::Bounds => "bounds",
            Constraint::Overlap => "overlap",
            Constraint::Count => "count",
            Constraint::Unsupported => "unsupported",
            Constraint::LoadBearing => "load-bearing",
            Constraint::PathStart => "path-start",
            Constraint::PathEnd => "path-end",
            Constraint::MissingArc => "missing-arc",
            Constraint::Resource => "resource",
            Constraint::TaskCoverage => "task-coverage",
            Constraint::CrewLimit => "crew-limit",
            Constraint::EmptyCrew => "empty-crew",
            Constraint::MissingTransition => "missing-transition",
            Constraint::DutyTime => "duty-time",
            Constraint::TreeLength => "tree-length",
            Constraint::Unsatisfiable => "unsatisfiable",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structured reason for infeasibility.
///
/// `entities` lists the offending ids in domain terms (planes, customers,
/// placement indices, path positions, resources, crews).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub entities: Vec<i64>,
    pub detail: String,
}

impl Violation {
    pub fn new(constraint: Constraint, entities: Vec<i64>, detail: impl Into<String>) -> Self {
        Violation {
            constraint,
            entities,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint)?;
        if !self.entities.is_empty() {
            let ids: Vec<String> = self.entities.iter().map(i64::to_string).collect();
            write!(f, " [{}]", ids.join(", "))?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Result of checking one solution: an objective or a violation, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawOutcomeRepr", try_from = "RawOutcomeRepr")]
pub enum RawOutcome {
    Feasible { objective: f64 },
    Infeasible { violation: Violation },
}

#[derive(Serialize, Deserialize)]
struct RawOutcomeRepr {
    feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    violation: Option<Violation>,
}

impl From<RawOutcome> for RawOutcomeRepr {
    fn from(o: RawOutcome) -> Self {
        match o {
            RawOutcome::Feasible { objective } => RawOutcomeRepr {
                feasible: true,
                objective: Some(objective),
                violation: None,
            },
            RawOutcome::Infeasible { violation } => RawOutcomeRepr {
                feasible: false,
                objective: None,
                violation: Some(violation),
            },
        }
    }
}

impl TryFrom<RawOutcomeRepr> for RawOutcome {
    type Error = String;

    fn try_from(r: RawOutcomeRepr) -> Result<Self, Self::Error> {
        match (r.feasible, r.objective, r.violation) {
            (true, Some(objective), None) => Ok(RawOutcome::Feasible { objective }),
            (false, None, Some(violation)) => Ok(RawOutcome::Infeasible { violation }),
            _ => Err("feasible must hold exactly when an objective and no violation is present".into()),
        }
    }
}

impl RawOutcome {
    pub fn feasible(objective: f64) -> Self {
        RawOutcome::Feasible { objective }
    }

    pub fn infeasible(constraint: Constraint, entities: Vec<i64>, detail: impl Into<String>) -> Self {
        RawOutcome::Infeasible {
            violation: Violation::new(constraint, entities, detail),
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, RawOutcome::Feasible { .. })
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            RawOutcome::Feasible { objective } => Some(*objective),
            RawOutcome::Infeasible { .. } => None,
        }
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            RawOutcome::Feasible { .. } => None,
            RawOutcome::Infeasible { violation } => Some(violation),
        }
    }
}

/// Per-instance validity flag and normalized score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub valid: u8,
    pub score: f64,
}

impl InstanceScore {
    pub const ZERO: InstanceScore = InstanceScore { valid: 0, score: 0.0 };
}

/// Symmetric min/max ratio of the achieved and reference objective magnitudes.
pub fn normalize_score(outcome: &RawOutcome, reference_objective: f64) -> InstanceScore {
    let Some(h) = outcome.objective() else {
        return InstanceScore::ZERO;
    };
    InstanceScore {
        valid: 1,
        score: ratio_score(h, reference_objective),
    }
}

/// The score of a feasible objective `h` against reference `h_ref`.
pub fn ratio_score(h: f64, h_ref: f64) -> f64 {
    if !h.is_finite() || !h_ref.is_finite() {
        return 0.0;
    }
    let (a, b) = (h.abs(), h_ref.abs());
    let hi = a.max(b);
    if hi == 0.0 {
        return 1.0;
    }
    a.min(b) / hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub mean_valid: f64,
    pub mean_score: f64,
    pub per_instance: Vec<InstanceScore>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot average an empty list of instance scores")]
    EmptyList,
}

/// Arithmetic means over the per-instance scores, summed in order.
pub fn dataset_metrics(scores: &[InstanceScore]) -> Result<DatasetMetrics, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let n = scores.len() as f64;
    let valid_sum: f64 = scores.iter().map(|s| s.valid as f64).sum();
    let score_sum: f64 = scores.iter().map(|s| s.score).sum();
    Ok(DatasetMetrics {
        mean_valid: valid_sum / n,
        mean_score: score_sum / n,
        per_instance: scores.to_vec(),
    })
}

/// Checks a parsed solution against an instance payload of the same domain.
pub fn evaluate_parsed(payload: &Payload, solution: &CandidateSolution) -> RawOutcome {
    match (payload, solution) {
        (Payload::AircraftLanding(i), CandidateSolution::AircraftLanding(s)) => evaluate_aircraft(i, s),
        (Payload::PeriodicVehicleRouting(i), CandidateSolution::PeriodicVehicleRouting(s)) => {
            evaluate_pvrp(i, s)
        }
        (Payload::ContainerLoading(i), CandidateSolution::ContainerLoading(s)) => evaluate_container(i, s),
        (Payload::ContainerLoadingWeight(i), CandidateSolution::ContainerLoadingWeight(s)) => {
            evaluate_container_weight(i, s)
        }
        (Payload::Rcsp(i), CandidateSolution::Rcsp(s)) => evaluate_rcsp(i, s),
        (Payload::CrewScheduling(i), CandidateSolution::CrewScheduling(s)) => evaluate_crew(i, s),
        (Payload::EuclideanSteiner(i), CandidateSolution::EuclideanSteiner(s)) => evaluate_steiner(i, s),
        (p, s) => RawOutcome::infeasible(
            Constraint::Malformed,
            vec![],
            format!("solution for {} given to a {} instance", s.domain(), p.domain()),
        ),
    }
}

/// Parses a raw solution document and checks it; parse failures are `malformed`.
pub fn evaluate_value(instance: &ProblemInstance, solution: &Value) -> RawOutcome {
    match CandidateSolution::parse(instance.domain(), solution) {
        Ok(parsed) => evaluate_parsed(&instance.payload, &parsed),
        Err(e) => RawOutcome::infeasible(Constraint::Malformed, vec![], e.to_string()),
    }
}

/// Outcome plus score, with the score absent when the instance has no reference.
pub fn grade(instance: &ProblemInstance, solution: &Value) -> (RawOutcome, Option<InstanceScore>) {
    let outcome = evaluate_value(instance, solution);
    let score = instance
        .reference_objective
        .map(|r| normalize_score(&outcome, r));
    (outcome, score)
}
