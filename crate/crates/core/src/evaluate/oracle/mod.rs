//! Brute-force oracles for small-class instances.
//!
//! Each oracle walks a finite candidate space and judges every candidate with
//! its own constraint logic (voxel grids, Kruskal trees, direct pair scans),
//! deliberately not sharing code with the evaluators. The best feasible
//! candidate is the exact optimum for every domain except Steiner, where the
//! space is a finite set of promising point sets and the result is a
//! best-known value.

mod aircraft;
mod container;
mod crew;
mod pvrp;
mod rcsp;
mod steiner;

use thiserror::Error;

use super::{Constraint, RawOutcome};
use crate::problem::{CandidateSolution, Dataset, Payload, ProblemError, ProblemInstance, Sense};

/// The oracle's own judgement of a candidate: its objective when feasible.
pub type Verdict = Option<f64>;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance `{instance_id}` is too large for the brute-force oracle: {reason}")]
    TooLarge { instance_id: String, reason: String },
    #[error(transparent)]
    Reference(#[from] ProblemError),
}

/// Visits every candidate of the oracle's search space with the oracle verdict.
///
/// Returns the number of candidates visited.
pub fn enumerate(
    instance: &ProblemInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, OracleError> {
    let wrap = |reason: String| OracleError::TooLarge {
        instance_id: instance.instance_id.clone(),
        reason,
    };
    match &instance.payload {
        Payload::AircraftLanding(p) => aircraft::enumerate(p, visit).map_err(wrap),
        Payload::PeriodicVehicleRouting(p) => pvrp::enumerate(p, visit).map_err(wrap),
        Payload::ContainerLoading(p) => container::enumerate_plain(p, visit).map_err(wrap),
        Payload::ContainerLoadingWeight(p) => container::enumerate_weight(p, visit).map_err(wrap),
        Payload::Rcsp(p) => rcsp::enumerate(p, visit).map_err(wrap),
        Payload::CrewScheduling(p) => crew::enumerate(p, visit).map_err(wrap),
        Payload::EuclideanSteiner(p) => steiner::enumerate(p, visit).map_err(wrap),
    }
}

fn better(sense: Sense, candidate: f64, incumbent: f64) -> bool {
    match sense {
        Sense::Minimize => candidate < incumbent,
        Sense::Maximize => candidate > incumbent,
    }
}

/// Best feasible candidate, earliest enumerated on ties; `None` if none is feasible.
pub fn oracle_best(instance: &ProblemInstance) -> Result<Option<(CandidateSolution, f64)>, OracleError> {
    if let Payload::PeriodicVehicleRouting(p) = &instance.payload {
        // days decouple once schedules are fixed, which keeps the search small
        return pvrp::best(p).map_err(|reason| OracleError::TooLarge {
            instance_id: instance.instance_id.clone(),
            reason,
        });
    }
    let sense = instance.domain().sense();
    let mut best: Option<(CandidateSolution, f64)> = None;
    enumerate(instance, &mut |cand, verdict| {
        if let Some(obj) = verdict {
            if best.as_ref().is_none_or(|(_, b)| better(sense, obj, *b)) {
                best = Some((cand.clone(), obj));
            }
        }
    })?;
    Ok(best)
}

/// Optimal objective (best-known for Steiner) or infeasible when nothing is feasible.
pub fn oracle_solve(instance: &ProblemInstance) -> Result<RawOutcome, OracleError> {
    Ok(match oracle_best(instance)? {
        Some((_, obj)) => RawOutcome::feasible(obj),
        None => RawOutcome::infeasible(
            Constraint::Unsatisfiable,
            vec![],
            "no candidate in the oracle's search space is feasible",
        ),
    })
}

/// Attaches oracle objectives as reference values to every instance.
pub fn attach_oracle_references(dataset: Dataset) -> Result<Dataset, OracleError> {
    let mut instances = Vec::with_capacity(dataset.instances.len());
    for inst in dataset.instances {
        let inst = match oracle_solve(&inst)?.objective() {
            Some(obj) => inst.attach_reference_objective(obj)?,
            None => inst,
        };
        instances.push(inst);
    }
    Ok(Dataset { instances, ..dataset })
}

/// Calls `f` for every assignment of `radix[i]` choices to position `i`.
pub(crate) fn odometer(radix: &[usize], mut f: impl FnMut(&[usize])) {
    if radix.contains(&0) {
        return;
    }
    let mut digits = vec![0usize; radix.len()];
    loop {
        f(&digits);
        let mut i = 0;
        loop {
            if i == radix.len() {
                return;
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// All permutations of `items` in lexicographic position order.
pub(crate) fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// All ways to split `items` into at most `max_blocks` non-empty ordered lists.
///
/// Blocks are unordered among themselves (listed by first-seen item), while the
/// order inside each block matters.
pub(crate) fn ordered_partitions<T: Clone>(items: &[T], max_blocks: usize) -> Vec<Vec<Vec<T>>> {
    let mut set_partitions: Vec<Vec<Vec<T>>> = Vec::new();
    fn grow<T: Clone>(items: &[T], i: usize, blocks: &mut Vec<Vec<T>>, max: usize, out: &mut Vec<Vec<Vec<T>>>) {
        if i == items.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i].clone());
            grow(items, i + 1, blocks, max, out);
            blocks[b].pop();
        }
        if blocks.len() < max {
            blocks.push(vec![items[i].clone()]);
            grow(items, i + 1, blocks, max, out);
            blocks.pop();
        }
    }
    grow(items, 0, &mut Vec::new(), max_blocks, &mut set_partitions);
    let mut out = Vec::new();
    for partition in set_partitions {
        let options: Vec<Vec<Vec<T>>> = partition.iter().map(|b| permutations(b)).collect();
        let radix: Vec<usize> = options.iter().map(Vec::len).collect();
        odometer(&radix, |digits| {
            out.push(digits.iter().enumerate().map(|(b, d)| options[b][*d].clone()).collect());
        });
    }
    out
}
