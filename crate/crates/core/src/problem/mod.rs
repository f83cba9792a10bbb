//! Problem domains, instance/solution models and the dataset file format.

mod describe;
mod generate;
mod payload;
mod solution;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use describe::task_description;
pub use generate::{generate_dataset, generate_instance, SizeBounds};
pub use payload::*;
pub use solution::*;

/// The seven supported problem domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainId {
    AircraftLanding,
    PeriodicVehicleRouting,
    ContainerLoading,
    ContainerLoadingWeight,
    Rcsp,
    CrewScheduling,
    EuclideanSteiner,
}

/// Whether a domain's raw objective is minimized or maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl DomainId {
    pub const ALL: [DomainId; 7] = [
        DomainId::AircraftLanding,
        DomainId::PeriodicVehicleRouting,
        DomainId::ContainerLoading,
        DomainId::ContainerLoadingWeight,
        DomainId::Rcsp,
        DomainId::CrewScheduling,
        DomainId::EuclideanSteiner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::AircraftLanding => "aircraft-landing",
            DomainId::PeriodicVehicleRouting => "periodic-vehicle-routing",
            DomainId::ContainerLoading => "container-loading",
            DomainId::ContainerLoadingWeight => "container-loading-weight",
            DomainId::Rcsp => "rcsp",
            DomainId::CrewScheduling => "crew-scheduling",
            DomainId::EuclideanSteiner => "euclidean-steiner",
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            DomainId::ContainerLoading
            | DomainId::ContainerLoadingWeight
            | DomainId::EuclideanSteiner => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown domain `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl FromStr for SizeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            other => Err(format!("unknown size class `{other}`")),
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("malformed schema in instance `{instance_id}` at `{path}`: {reason}")]
    MalformedSchema {
        instance_id: String,
        path: String,
        reason: String,
    },
    #[error("invariant violated in instance `{instance_id}`: {reason}")]
    InvariantViolation { instance_id: String, reason: String },
    #[error("instance `{instance_id}` already has reference objective {existing}, refusing {requested}")]
    ConflictingReference {
        instance_id: String,
        existing: f64,
        requested: f64,
    },
    #[error("reference objective must be finite, got {0}")]
    NonFiniteReference(f64),
    #[error("failed to read dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ProblemError {
    fn malformed(instance_id: &str, path: impl Into<String>, reason: impl Into<String>) -> Self {
        ProblemError::MalformedSchema {
            instance_id: instance_id.to_string(),
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// One concrete instance of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub instance_id: String,
    pub payload: Payload,
    pub reference_objective: Option<f64>,
}

impl ProblemInstance {
    pub fn domain(&self) -> DomainId {
        self.payload.domain()
    }

    /// Returns the instance with `reference_objective` set.
    ///
    /// Re-attaching the identical value is a no-op; a different value is a conflict.
    pub fn attach_reference_objective(mut self, value: f64) -> Result<Self, ProblemError> {
        if !value.is_finite() {
            return Err(ProblemError::NonFiniteReference(value));
        }
        match self.reference_objective {
            Some(existing) if existing.to_bits() != value.to_bits() => {
                Err(ProblemError::ConflictingReference {
                    instance_id: self.instance_id,
                    existing,
                    requested: value,
                })
            }
            _ => {
                self.reference_objective = Some(value);
                Ok(self)
            }
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "instance_id": self.instance_id,
            "payload": self.payload.to_value(),
            "reference_objective": self.reference_objective,
        })
    }

    /// Parses and validates one instance object of the dataset schema.
    pub fn from_value(domain: DomainId, value: &Value) -> Result<Self, ProblemError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ProblemError::malformed("?", "", "instance must be an object"))?;
        let instance_id = match obj.get("instance_id") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                return Err(ProblemError::malformed("?", "instance_id", "expected a string"))
            }
            None => return Err(ProblemError::malformed("?", "instance_id", "missing field")),
        };
        let reference_objective = match obj.get("reference_objective") {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => {
                let v = n.as_f64().unwrap_or(f64::NAN);
                if !v.is_finite() {
                    return Err(ProblemError::malformed(
                        &instance_id,
                        "reference_objective",
                        "must be finite",
                    ));
                }
                Some(v)
            }
            Some(_) => {
                return Err(ProblemError::malformed(
                    &instance_id,
                    "reference_objective",
                    "expected a number or null",
                ))
            }
        };
        let raw_payload = obj
            .get("payload")
            .ok_or_else(|| ProblemError::malformed(&instance_id, "payload", "missing field"))?;
        let payload = Payload::from_value(domain, raw_payload).map_err(|e| match e {
            PayloadError::Schema { path, reason } => {
                ProblemError::malformed(&instance_id, format!("payload.{path}"), reason)
            }
            PayloadError::Invariant(reason) => ProblemError::InvariantViolation {
                instance_id: instance_id.clone(),
                reason,
            },
        })?;
        Ok(ProblemInstance {
            instance_id,
            payload,
            reference_objective,
        })
    }
}

/// An ordered, non-empty collection of instances of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub domain: DomainId,
    pub split: Split,
    pub instances: Vec<ProblemInstance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn to_value(&self) -> Value {
        json!({
            "domain": self.domain,
            "split": self.split,
            "instances": self.instances.iter().map(ProblemInstance::to_value).collect::<Vec<_>>(),
        })
    }

    /// Canonical serialized form (pretty JSON with a trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("dataset serializes");
        s.push('\n');
        s
    }

    pub fn from_value(value: &Value) -> Result<Self, ProblemError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ProblemError::malformed("-", "", "dataset must be a JSON object"))?;
        let domain: DomainId = match obj.get("domain") {
            Some(Value::String(s)) => s
                .parse()
                .map_err(|e: String| ProblemError::malformed("-", "domain", e))?,
            _ => return Err(ProblemError::malformed("-", "domain", "missing or not a string")),
        };
        let split: Split = match obj.get("split") {
            Some(Value::String(s)) => s
                .parse()
                .map_err(|e: String| ProblemError::malformed("-", "split", e))?,
            _ => return Err(ProblemError::malformed("-", "split", "missing or not a string")),
        };
        let raw = match obj.get("instances") {
            Some(Value::Array(items)) => items,
            _ => return Err(ProblemError::malformed("-", "instances", "missing or not an array")),
        };
        if raw.is_empty() {
            return Err(ProblemError::malformed(
                "-",
                "instances",
                "dataset must contain at least one instance",
            ));
        }
        let mut seen = HashSet::new();
        let mut instances = Vec::with_capacity(raw.len());
        for item in raw {
            let instance = ProblemInstance::from_value(domain, item)?;
            if !seen.insert(instance.instance_id.clone()) {
                return Err(ProblemError::InvariantViolation {
                    instance_id: instance.instance_id,
                    reason: "duplicate instance_id within dataset".into(),
                });
            }
            instances.push(instance);
        }
        Ok(Dataset {
            domain,
            split,
            instances,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            ProblemError::malformed("-", format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        Dataset::from_value(&value)
    }
}

/// Loads a dataset file and checks that it belongs to the requested split.
pub fn load_dataset(path: &Path, split: Split) -> Result<Dataset, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let dataset = Dataset::from_json(&text)?;
    if dataset.split != split {
        return Err(ProblemError::malformed(
            "-",
            "split",
            format!("expected `{split}`, file declares `{}`", dataset.split),
        ));
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aircraft_dataset() -> Dataset {
        generate_dataset(DomainId::AircraftLanding, SizeClass::Small, 11, 3, Split::Dev)
    }

    #[test]
    fn load_preserves_order() {
        let ds = aircraft_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dev.json");
        std::fs::write(&path, ds.to_json()).unwrap();
        let loaded = load_dataset(&path, Split::Dev).unwrap();
        assert_eq!(loaded.len(), 3);
        let ids: Vec<_> = loaded.instances.iter().map(|i| i.instance_id.as_str()).collect();
        let expected: Vec<_> = ds.instances.iter().map(|i| i.instance_id.as_str()).collect();
        assert_eq!(ids, expected);
        assert_eq!(loaded, ds);
    }

    #[test]
    fn earliest_after_latest_is_invariant_violation() {
        let ds = aircraft_dataset();
        let mut value = ds.to_value();
        let plane = &mut value["instances"][1]["payload"]["planes"][0];
        plane["earliest"] = json!(100.0);
        plane["target"] = json!(100.0);
        plane["latest"] = json!(50.0);
        let err = Dataset::from_value(&value).unwrap_err();
        match err {
            ProblemError::InvariantViolation { instance_id, .. } => {
                assert_eq!(instance_id, ds.instances[1].instance_id)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_malformed() {
        let value = json!({"domain": "rcsp", "split": "dev", "instances": []});
        assert!(matches!(
            Dataset::from_value(&value),
            Err(ProblemError::MalformedSchema { .. })
        ));
    }

    #[test]
    fn missing_field_reports_path() {
        let ds = aircraft_dataset();
        let mut value = ds.to_value();
        value["instances"][0]["payload"]
            .as_object_mut()
            .unwrap()
            .remove("separation");
        match Dataset::from_value(&value).unwrap_err() {
            ProblemError::MalformedSchema { path, instance_id, .. } => {
                assert_eq!(instance_id, ds.instances[0].instance_id);
                assert!(path.starts_with("payload"), "{path}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_mismatch_rejected() {
        let ds = aircraft_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dev.json");
        std::fs::write(&path, ds.to_json()).unwrap();
        assert!(load_dataset(&path, Split::Test).is_err());
    }

    #[test]
    fn attach_reference_contract() {
        let inst = generate_instance(DomainId::EuclideanSteiner, SizeClass::Small, 3);
        let inst = ProblemInstance {
            reference_objective: None,
            ..inst
        };
        let inst = inst.attach_reference_objective(12.5).unwrap();
        assert_eq!(inst.reference_objective, Some(12.5));
        let again = inst.clone().attach_reference_objective(12.5).unwrap();
        assert_eq!(again, inst);
        assert!(matches!(
            inst.attach_reference_objective(13.0),
            Err(ProblemError::ConflictingReference { .. })
        ));
    }

    #[test]
    fn domain_names_round_trip() {
        for d in DomainId::ALL {
            assert_eq!(d.as_str().parse::<DomainId>().unwrap(), d);
            assert_eq!(serde_json::to_value(d).unwrap(), json!(d.as_str()));
        }
        assert_eq!(DomainId::ALL.len(), 7);
    }
}
