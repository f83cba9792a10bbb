use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DomainId;

pub(crate) enum PayloadError {
    Schema { path: String, reason: String },
    Invariant(String),
}

fn invariant(reason: impl Into<String>) -> PayloadError {
    PayloadError::Invariant(reason.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plane {
    pub earliest: f64,
    pub target: f64,
    pub latest: f64,
    pub penalty_early: f64,
    pub penalty_late: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftLandingInstance {
    pub num_planes: usize,
    pub num_runways: usize,
    pub planes: Vec<Plane>,
    pub separation: Vec<Vec<f64>>,
}

impl AircraftLandingInstance {
    fn validate(&self) -> Result<(), PayloadError> {
        if self.num_planes == 0 || self.num_runways == 0 {
            return Err(invariant("num_planes and num_runways must be positive"));
        }
        if self.planes.len() != self.num_planes {
            return Err(invariant(format!(
                "planes has {} entries, num_planes is {}",
                self.planes.len(),
                self.num_planes
            )));
        }
        for (i, p) in self.planes.iter().enumerate() {
            let fields = [p.earliest, p.target, p.latest, p.penalty_early, p.penalty_late];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(invariant(format!("plane {} has a non-finite field", i + 1)));
            }
            if !(p.earliest <= p.target && p.target <= p.latest) {
                return Err(invariant(format!(
                    "plane {} violates earliest <= target <= latest",
                    i + 1
                )));
            }
            if p.penalty_early < 0.0 || p.penalty_late < 0.0 {
                return Err(invariant(format!("plane {} has a negative penalty", i + 1)));
            }
        }
        if self.separation.len() != self.num_planes
            || self.separation.iter().any(|row| row.len() != self.num_planes)
        {
            return Err(invariant("separation must be num_planes x num_planes"));
        }
        if self.separation.iter().flatten().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invariant("separation entries must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvrpCustomer {
    pub coords: [f64; 2],
    pub demand: f64,
    pub schedules: Vec<Vec<u8>>,
}

/// Periodic vehicle routing. Customer ids are 1-based list positions; the depot is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvrpInstance {
    pub depot: [f64; 2],
    pub customers: Vec<PvrpCustomer>,
    pub period_length: usize,
    pub vehicles_per_day: Vec<u32>,
    pub vehicle_capacity: f64,
}

impl PvrpInstance {
    pub fn coords(&self, vertex: usize) -> [f64; 2] {
        if vertex == 0 {
            self.depot
        } else {
            self.customers[vertex - 1].coords
        }
    }

    fn validate(&self) -> Result<(), PayloadError> {
        if self.period_length == 0 {
            return Err(invariant("period_length must be positive"));
        }
        if self.vehicles_per_day.len() != self.period_length {
            return Err(invariant("vehicles_per_day must have period_length entries"));
        }
        if self.vehicles_per_day.contains(&0) {
            return Err(invariant("vehicles_per_day entries must be positive"));
        }
        if !(self.vehicle_capacity.is_finite() && self.vehicle_capacity > 0.0) {
            return Err(invariant("vehicle_capacity must be positive"));
        }
        if self.depot.iter().any(|c| !c.is_finite()) {
            return Err(invariant("depot coordinates must be finite"));
        }
        for (i, c) in self.customers.iter().enumerate() {
            let id = i + 1;
            if c.coords.iter().any(|v| !v.is_finite()) {
                return Err(invariant(format!("customer {id} has non-finite coordinates")));
            }
            if !(c.demand.is_finite() && c.demand >= 0.0) {
                return Err(invariant(format!("customer {id} has invalid demand")));
            }
            if c.schedules.is_empty() {
                return Err(invariant(format!("customer {id} has no candidate schedule")));
            }
            for s in &c.schedules {
                if s.len() != self.period_length {
                    return Err(invariant(format!(
                        "customer {id} has a schedule of length {} (period_length {})",
                        s.len(),
                        self.period_length
                    )));
                }
                if s.iter().any(|b| *b > 1) {
                    return Err(invariant(format!("customer {id} schedule is not binary")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxType {
    pub dims: [u32; 3],
    pub flags: [u8; 3],
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb3: Option<f64>,
}

impl BoxType {
    pub fn volume(&self) -> u64 {
        self.dims.iter().map(|d| *d as u64).product()
    }

    /// Load-bearing limit for a 1-based orientation, when present.
    pub fn load_limit(&self, orientation: usize) -> Option<f64> {
        match orientation {
            1 => self.lb1,
            2 => self.lb2,
            3 => self.lb3,
            _ => None,
        }
    }

    fn has_weight_fields(&self) -> (bool, bool) {
        let fields = [self.weight, self.lb1, self.lb2, self.lb3];
        (
            fields.iter().all(Option::is_some),
            fields.iter().any(Option::is_some),
        )
    }
}

/// Shared by both container domains; the weight variant requires the weight fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerInstance {
    pub container: [u32; 3],
    pub box_types: Vec<BoxType>,
}

impl ContainerInstance {
    pub fn volume(&self) -> u64 {
        self.container.iter().map(|d| *d as u64).product()
    }

    fn validate(&self, weighted: bool) -> Result<(), PayloadError> {
        if self.container.contains(&0) {
            return Err(invariant("container dimensions must be positive"));
        }
        if self.box_types.is_empty() {
            return Err(invariant("at least one box type is required"));
        }
        for (i, b) in self.box_types.iter().enumerate() {
            let id = i + 1;
            if b.dims.contains(&0) || b.count == 0 {
                return Err(invariant(format!("box type {id} needs positive dims and count")));
            }
            if b.flags.iter().any(|f| *f > 1) || b.flags.iter().all(|f| *f == 0) {
                return Err(invariant(format!(
                    "box type {id} flags must be binary with at least one set"
                )));
            }
            let (all, any) = b.has_weight_fields();
            if weighted && !all {
                return Err(invariant(format!(
                    "box type {id} must carry weight, lb1, lb2 and lb3"
                )));
            }
            if !weighted && any {
                return Err(invariant(format!(
                    "box type {id} carries weight fields outside the weighted domain"
                )));
            }
            for v in [b.weight, b.lb1, b.lb2, b.lb3].into_iter().flatten() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invariant(format!(
                        "box type {id} has a negative or non-finite weight field"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Arc of the resource-constrained shortest path graph, serialized as
/// `[end_vertex, cost, arc_resources]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, f64, Vec<f64>)", into = "(u32, f64, Vec<f64>)")]
pub struct RcspArc {
    pub end: u32,
    pub cost: f64,
    pub resources: Vec<f64>,
}

impl From<(u32, f64, Vec<f64>)> for RcspArc {
    fn from((end, cost, resources): (u32, f64, Vec<f64>)) -> Self {
        RcspArc { end, cost, resources }
    }
}

impl From<RcspArc> for (u32, f64, Vec<f64>) {
    fn from(a: RcspArc) -> Self {
        (a.end, a.cost, a.resources)
    }
}

/// Resource-constrained shortest path from vertex 1 to vertex `n` (1-based vertices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcspInstance {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub vertex_resources: Vec<Vec<f64>>,
    pub graph: BTreeMap<u32, Vec<RcspArc>>,
}

impl RcspInstance {
    /// First listed arc from `from` to `to`.
    pub fn arc(&self, from: u32, to: u32) -> Option<&RcspArc> {
        self.graph.get(&from)?.iter().find(|a| a.end == to)
    }

    fn validate(&self) -> Result<(), PayloadError> {
        if self.n < 2 {
            return Err(invariant("n must be at least 2"));
        }
        if self.lower_bounds.len() != self.k || self.upper_bounds.len() != self.k {
            return Err(invariant("bounds must have K entries"));
        }
        for k in 0..self.k {
            if !(self.lower_bounds[k].is_finite() && self.upper_bounds[k].is_finite()) {
                return Err(invariant(format!("bounds of resource {} are not finite", k + 1)));
            }
            if self.lower_bounds[k] > self.upper_bounds[k] {
                return Err(invariant(format!(
                    "lower bound exceeds upper bound for resource {}",
                    k + 1
                )));
            }
        }
        if self.vertex_resources.len() != self.n
            || self.vertex_resources.iter().any(|r| r.len() != self.k)
        {
            return Err(invariant("vertex_resources must be n x K"));
        }
        if self
            .vertex_resources
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invariant("vertex resources must be finite and non-negative"));
        }
        let mut arcs = 0usize;
        for (from, list) in &self.graph {
            if *from < 1 || *from as usize > self.n {
                return Err(invariant(format!("graph vertex {from} outside 1..n")));
            }
            for a in list {
                arcs += 1;
                if a.end < 1 || a.end as usize > self.n {
                    return Err(invariant(format!("arc {from}->{} ends outside 1..n", a.end)));
                }
                if a.resources.len() != self.k {
                    return Err(invariant(format!("arc {from}->{} needs K resources", a.end)));
                }
                if !a.cost.is_finite() || a.resources.iter().any(|r| !r.is_finite()) {
                    return Err(invariant(format!("arc {from}->{} has non-finite data", a.end)));
                }
            }
        }
        if arcs != self.m {
            return Err(invariant(format!("graph lists {arcs} arcs but m is {}", self.m)));
        }
        Ok(())
    }
}

/// Transition arc between two crew tasks, serialized as `[from_task, to_task, cost]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, f64)", into = "(u32, u32, f64)")]
pub struct CrewArc {
    pub from: u32,
    pub to: u32,
    pub cost: f64,
}

impl From<(u32, u32, f64)> for CrewArc {
    fn from((from, to, cost): (u32, u32, f64)) -> Self {
        CrewArc { from, to, cost }
    }
}

impl From<CrewArc> for (u32, u32, f64) {
    fn from(a: CrewArc) -> Self {
        (a.from, a.to, a.cost)
    }
}

/// Crew scheduling; tasks map id (1..=N) to `[start_time, finish_time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrewInstance {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub time_limit: f64,
    pub tasks: BTreeMap<u32, (f64, f64)>,
    pub arcs: Vec<CrewArc>,
}

impl CrewInstance {
    /// First listed transition cost between two tasks.
    pub fn transition(&self, from: u32, to: u32) -> Option<f64> {
        self.arcs
            .iter()
            .find(|a| a.from == from && a.to == to)
            .map(|a| a.cost)
    }

    fn validate(&self) -> Result<(), PayloadError> {
        if self.n == 0 || self.k == 0 {
            return Err(invariant("N and K must be positive"));
        }
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            return Err(invariant("time_limit must be positive"));
        }
        if self.tasks.len() != self.n || (1..=self.n as u32).any(|t| !self.tasks.contains_key(&t))
        {
            return Err(invariant("tasks must be keyed exactly by 1..=N"));
        }
        for (id, (s, f)) in &self.tasks {
            if !(s.is_finite() && f.is_finite()) || s > f {
                return Err(invariant(format!("task {id} violates start <= finish")));
            }
        }
        for a in &self.arcs {
            if !self.tasks.contains_key(&a.from) || !self.tasks.contains_key(&a.to) {
                return Err(invariant(format!("arc {}->{} references unknown task", a.from, a.to)));
            }
            if !a.cost.is_finite() {
                return Err(invariant(format!("arc {}->{} has non-finite cost", a.from, a.to)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinerInstance {
    pub points: Vec<[f64; 2]>,
}

impl SteinerInstance {
    fn validate(&self) -> Result<(), PayloadError> {
        if self.points.len() < 2 {
            return Err(invariant("at least two terminals are required"));
        }
        if self.points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invariant("terminal coordinates must be finite"));
        }
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                if (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12 {
                    return Err(invariant("duplicate terminal coordinates"));
                }
            }
        }
        Ok(())
    }
}

/// Domain-specific instance data.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    AircraftLanding(AircraftLandingInstance),
    PeriodicVehicleRouting(PvrpInstance),
    ContainerLoading(ContainerInstance),
    ContainerLoadingWeight(ContainerInstance),
    Rcsp(RcspInstance),
    CrewScheduling(CrewInstance),
    EuclideanSteiner(SteinerInstance),
}

fn parse<T: DeserializeOwned>(value: &Value) -> Result<T, PayloadError> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| PayloadError::Schema {
        path: e.path().to_string(),
        reason: e.inner().to_string(),
    })
}

impl Payload {
    pub fn domain(&self) -> DomainId {
        match self {
            Payload::AircraftLanding(_) => DomainId::AircraftLanding,
            Payload::PeriodicVehicleRouting(_) => DomainId::PeriodicVehicleRouting,
            Payload::ContainerLoading(_) => DomainId::ContainerLoading,
            Payload::ContainerLoadingWeight(_) => DomainId::ContainerLoadingWeight,
            Payload::Rcsp(_) => DomainId::Rcsp,
            Payload::CrewScheduling(_) => DomainId::CrewScheduling,
            Payload::EuclideanSteiner(_) => DomainId::EuclideanSteiner,
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            Payload::AircraftLanding(p) => serde_json::to_value(p),
            Payload::PeriodicVehicleRouting(p) => serde_json::to_value(p),
            Payload::ContainerLoading(p) | Payload::ContainerLoadingWeight(p) => {
                serde_json::to_value(p)
            }
            Payload::Rcsp(p) => serde_json::to_value(p),
            Payload::CrewScheduling(p) => serde_json::to_value(p),
            Payload::EuclideanSteiner(p) => serde_json::to_value(p),
        };
        v.expect("payload serializes")
    }

    pub(crate) fn from_value(domain: DomainId, value: &Value) -> Result<Self, PayloadError> {
        let payload = match domain {
            DomainId::AircraftLanding => Payload::AircraftLanding(parse(value)?),
            DomainId::PeriodicVehicleRouting => Payload::PeriodicVehicleRouting(parse(value)?),
            DomainId::ContainerLoading => Payload::ContainerLoading(parse(value)?),
            DomainId::ContainerLoadingWeight => Payload::ContainerLoadingWeight(parse(value)?),
            DomainId::Rcsp => Payload::Rcsp(parse(value)?),
            DomainId::CrewScheduling => Payload::CrewScheduling(parse(value)?),
            DomainId::EuclideanSteiner => Payload::EuclideanSteiner(parse(value)?),
        };
        payload.validate()?;
        Ok(payload)
    }

    pub(crate) fn validate(&self) -> Result<(), PayloadError> {
        match self {
            Payload::AircraftLanding(p) => p.validate(),
            Payload::PeriodicVehicleRouting(p) => p.validate(),
            Payload::ContainerLoading(p) => p.validate(false),
            Payload::ContainerLoadingWeight(p) => p.validate(true),
            Payload::Rcsp(p) => p.validate(),
            Payload::CrewScheduling(p) => p.validate(),
            Payload::EuclideanSteiner(p) => p.validate(),
        }
    }

    /// Checks the structural invariants, returning a human-readable reason on failure.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.validate().map_err(|e| match e {
            PayloadError::Schema { path, reason } => format!("{path}: {reason}"),
            PayloadError::Invariant(reason) => reason,
        })
    }
}
