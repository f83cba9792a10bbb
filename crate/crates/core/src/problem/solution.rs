//! Solution payloads as produced by synthesized solvers.
//!
//! Parsing is deliberately lenient about number representation (a solver may
//! emit `3.0` where an integer is expected) and strict about structure.
//! Unknown extra keys are ignored.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};

use super::DomainId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionParseError {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for SolutionParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

impl std::error::Error for SolutionParseError {}

fn err(path: impl Into<String>, reason: impl Into<String>) -> SolutionParseError {
    SolutionParseError {
        path: path.into(),
        reason: reason.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, SolutionParseError> {
    obj.get(key).ok_or_else(|| err(key, "missing field"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, SolutionParseError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SolutionParseError> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Result<f64, SolutionParseError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(err(path, "expected a finite number")),
    }
}

/// Integer, accepting integral floats such as `2.0`.
fn integer(v: &Value, path: &str) -> Result<i64, SolutionParseError> {
    if let Some(i) = v.as_i64() {
        return Ok(i);
    }
    match v.as_f64() {
        Some(x) if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 => Ok(x as i64),
        _ => Err(err(path, "expected an integer")),
    }
}

fn int_key(key: &str, path: &str) -> Result<i64, SolutionParseError> {
    key.trim()
        .parse::<i64>()
        .or_else(|_| {
            key.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.fract() == 0.0)
                .map(|x| x as i64)
                .ok_or(())
        })
        .map_err(|_| err(path, format!("key `{key}` is not an integer id")))
}

fn point(v: &Value, path: &str) -> Result<[f64; 2], SolutionParseError> {
    let items = array(v, path)?;
    if items.len() != 2 {
        return Err(err(path, "expected a pair [x, y]"));
    }
    Ok([number(&items[0], path)?, number(&items[1], path)?])
}

/// Keyed map whose integer keys must be unique after normalization ("1" and "1.0" collide).
fn int_keyed<'a>(
    obj: &'a Map<String, Value>,
    path: &str,
) -> Result<BTreeMap<i64, &'a Value>, SolutionParseError> {
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        let id = int_key(k, path)?;
        if out.insert(id, v).is_some() {
            return Err(err(path, format!("duplicate entry for id {id}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landing {
    pub landing_time: f64,
    /// Kept as a real so that non-integer runways can be reported as infeasible.
    pub runway: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AircraftSolution {
    /// Plane id (1-based) to landing.
    pub schedule: BTreeMap<i64, Landing>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvrpSolution {
    /// Customer id to the chosen schedule vector.
    pub selected_schedules: BTreeMap<i64, Vec<i64>>,
    /// Day (1-based) to the list of tours; each tour is a list of vertex ids.
    pub tours: BTreeMap<i64, Vec<Vec<i64>>>,
}

/// `[box_type, container_id, x, y, z, v, hswap]`, box types and containers 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub box_type: i64,
    pub container_id: i64,
    pub x: i64,
    pub y: i64,
    pub z: i64,
    pub v: i64,
    pub hswap: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerSolution {
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightPlacement {
    pub box_type: i64,
    pub orientation: i64,
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerWeightSolution {
    pub placements: Vec<WeightPlacement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcspSolution {
    pub path: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrewSolution {
    pub crews: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteinerSolution {
    pub steiner_points: Vec<[f64; 2]>,
}

/// A structurally parsed solution for one domain. Feasibility is the evaluator's job.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSolution {
    AircraftLanding(AircraftSolution),
    PeriodicVehicleRouting(PvrpSolution),
    ContainerLoading(ContainerSolution),
    ContainerLoadingWeight(ContainerWeightSolution),
    Rcsp(RcspSolution),
    CrewScheduling(CrewSolution),
    EuclideanSteiner(SteinerSolution),
}

impl CandidateSolution {
    pub fn domain(&self) -> DomainId {
        match self {
            CandidateSolution::AircraftLanding(_) => DomainId::AircraftLanding,
            CandidateSolution::PeriodicVehicleRouting(_) => DomainId::PeriodicVehicleRouting,
            CandidateSolution::ContainerLoading(_) => DomainId::ContainerLoading,
            CandidateSolution::ContainerLoadingWeight(_) => DomainId::ContainerLoadingWeight,
            CandidateSolution::Rcsp(_) => DomainId::Rcsp,
            CandidateSolution::CrewScheduling(_) => DomainId::CrewScheduling,
            CandidateSolution::EuclideanSteiner(_) => DomainId::EuclideanSteiner,
        }
    }

    pub fn parse(domain: DomainId, value: &Value) -> Result<Self, SolutionParseError> {
        let obj = object(value, "solution")?;
        Ok(match domain {
            DomainId::AircraftLanding => {
                let raw = object(field(obj, "schedule")?, "schedule")?;
                let mut schedule = BTreeMap::new();
                for (id, entry) in int_keyed(raw, "schedule")? {
                    let path = format!("schedule.{id}");
                    let e = object(entry, &path)?;
                    let landing_time = number(field(e, "landing_time")?, &path)?;
                    let runway = number(field(e, "runway")?, &path)?;
                    schedule.insert(id, Landing { landing_time, runway });
                }
                CandidateSolution::AircraftLanding(AircraftSolution { schedule })
            }
            DomainId::PeriodicVehicleRouting => {
                let sel = object(field(obj, "selected_schedules")?, "selected_schedules")?;
                let mut selected_schedules = BTreeMap::new();
                for (id, v) in int_keyed(sel, "selected_schedules")? {
                    let path = format!("selected_schedules.{id}");
                    let bits = array(v, &path)?
                        .iter()
                        .map(|b| integer(b, &path))
                        .collect::<Result<Vec<_>, _>>()?;
                    selected_schedules.insert(id, bits);
                }
                let raw_tours = object(field(obj, "tours")?, "tours")?;
                let mut tours = BTreeMap::new();
                for (day, v) in int_keyed(raw_tours, "tours")? {
                    let path = format!("tours.{day}");
                    let list = array(v, &path)?
                        .iter()
                        .map(|t| {
                            array(t, &path)?
                                .iter()
                                .map(|x| integer(x, &path))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    tours.insert(day, list);
                }
                CandidateSolution::PeriodicVehicleRouting(PvrpSolution {
                    selected_schedules,
                    tours,
                })
            }
            DomainId::ContainerLoading => {
                let items = array(field(obj, "placements")?, "placements")?;
                let mut placements = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let path = format!("placements[{i}]");
                    let ints = array(item, &path)?
                        .iter()
                        .map(|x| integer(x, &path))
                        .collect::<Result<Vec<_>, _>>()?;
                    if ints.len() != 7 {
                        return Err(err(path, "expected seven integers"));
                    }
                    placements.push(Placement {
                        box_type: ints[0],
                        container_id: ints[1],
                        x: ints[2],
                        y: ints[3],
                        z: ints[4],
                        v: ints[5],
                        hswap: ints[6],
                    });
                }
                CandidateSolution::ContainerLoading(ContainerSolution { placements })
            }
            DomainId::ContainerLoadingWeight => {
                let items = array(field(obj, "placements")?, "placements")?;
                let mut placements = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let path = format!("placements[{i}]");
                    let e = object(item, &path)?;
                    let get = |k: &str| -> Result<i64, SolutionParseError> {
                        integer(
                            e.get(k).ok_or_else(|| err(format!("{path}.{k}"), "missing field"))?,
                            &format!("{path}.{k}"),
                        )
                    };
                    placements.push(WeightPlacement {
                        box_type: get("box_type")?,
                        orientation: get("orientation")?,
                        x: get("x")?,
                        y: get("y")?,
                        z: get("z")?,
                    });
                }
                CandidateSolution::ContainerLoadingWeight(ContainerWeightSolution { placements })
            }
            DomainId::Rcsp => {
                let path = array(field(obj, "path")?, "path")?
                    .iter()
                    .map(|x| integer(x, "path"))
                    .collect::<Result<Vec<_>, _>>()?;
                CandidateSolution::Rcsp(RcspSolution { path })
            }
            DomainId::CrewScheduling => {
                let crews = array(field(obj, "crews")?, "crews")?
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let path = format!("crews[{i}]");
                        array(c, &path)?
                            .iter()
                            .map(|x| integer(x, &path))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                CandidateSolution::CrewScheduling(CrewSolution { crews })
            }
            DomainId::EuclideanSteiner => {
                let steiner_points = array(field(obj, "steiner_points")?, "steiner_points")?
                    .iter()
                    .enumerate()
                    .map(|(i, p)| point(p, &format!("steiner_points[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                CandidateSolution::EuclideanSteiner(SteinerSolution { steiner_points })
            }
        })
    }

    /// Serializes to the payload shape a solver would yield.
    pub fn to_value(&self) -> Value {
        match self {
            CandidateSolution::AircraftLanding(s) => {
                let schedule: Map<String, Value> = s
                    .schedule
                    .iter()
                    .map(|(id, l)| {
                        (
                            id.to_string(),
                            json!({"landing_time": l.landing_time, "runway": l.runway}),
                        )
                    })
                    .collect();
                json!({ "schedule": schedule })
            }
            CandidateSolution::PeriodicVehicleRouting(s) => {
                let sel: Map<String, Value> = s
                    .selected_schedules
                    .iter()
                    .map(|(id, bits)| (id.to_string(), json!(bits)))
                    .collect();
                let tours: Map<String, Value> = s
                    .tours
                    .iter()
                    .map(|(day, t)| (day.to_string(), json!(t)))
                    .collect();
                json!({ "selected_schedules": sel, "tours": tours })
            }
            CandidateSolution::ContainerLoading(s) => {
                let rows: Vec<Value> = s
                    .placements
                    .iter()
                    .map(|p| json!([p.box_type, p.container_id, p.x, p.y, p.z, p.v, p.hswap]))
                    .collect();
                json!({ "placements": rows })
            }
            CandidateSolution::ContainerLoadingWeight(s) => {
                let rows: Vec<Value> = s
                    .placements
                    .iter()
                    .map(|p| {
                        json!({"box_type": p.box_type, "orientation": p.orientation,
                               "x": p.x, "y": p.y, "z": p.z})
                    })
                    .collect();
                json!({ "placements": rows })
            }
            CandidateSolution::Rcsp(s) => json!({ "path": s.path }),
            CandidateSolution::CrewScheduling(s) => json!({ "crews": s.crews }),
            CandidateSolution::EuclideanSteiner(s) => json!({ "steiner_points": s.steiner_points }),
        }
    }
}
