//! Both container-loading variants. All geometry is exact integer arithmetic.

use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{ContainerInstance, ContainerSolution, ContainerWeightSolution};

#[derive(Debug, Clone, Copy)]
struct Cuboid {
    type_index: usize,
    origin: [i64; 3],
    size: [i64; 3],
}

impl Cuboid {
    fn overlaps(&self, other: &Cuboid) -> bool {
        (0..3).all(|a| {
            self.origin[a] < other.origin[a] + other.size[a]
                && other.origin[a] < self.origin[a] + self.size[a]
        })
    }

    fn top(&self) -> i64 {
        self.origin[2] + self.size[2]
    }

    fn footprint_within(&self, below: &Cuboid) -> bool {
        (0..2).all(|a| {
            self.origin[a] >= below.origin[a]
                && self.origin[a] + self.size[a] <= below.origin[a] + below.size[a]
        })
    }
}

/// Side lengths when `dims[vertical]` stands upright; the other two keep their order.
pub(crate) fn oriented_size(dims: [u32; 3], vertical: usize, swap: bool) -> [i64; 3] {
    let mut rest = (0..3).filter(|i| *i != vertical).map(|i| dims[i] as i64);
    let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
    let (x, y) = if swap { (b, a) } else { (a, b) };
    [x, y, dims[vertical] as i64]
}

fn check_bounds(inst: &ContainerInstance, boxes: &[Cuboid]) -> Option<RawOutcome> {
    for (i, b) in boxes.iter().enumerate() {
        let inside = (0..3).all(|a| b.origin[a] >= 0 && b.origin[a] + b.size[a] <= inst.container[a] as i64);
        if !inside {
            return Some(RawOutcome::infeasible(
                Constraint::Bounds,
                vec![i as i64],
                format!(
                    "placement {i} at {:?} with size {:?} leaves the container {:?}",
                    b.origin, b.size, inst.container
                ),
            ));
        }
    }
    None
}

fn check_overlap(boxes: &[Cuboid]) -> Option<RawOutcome> {
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].overlaps(&boxes[j]) {
                return Some(RawOutcome::infeasible(
                    Constraint::Overlap,
                    vec![i as i64, j as i64],
                    format!("placements {i} and {j} share interior volume"),
                ));
            }
        }
    }
    None
}

fn check_counts(inst: &ContainerInstance, boxes: &[Cuboid]) -> Option<RawOutcome> {
    for (t, bt) in inst.box_types.iter().enumerate() {
        let used = boxes.iter().filter(|b| b.type_index == t).count() as u64;
        if used > bt.count as u64 {
            return Some(RawOutcome::infeasible(
                Constraint::Count,
                vec![t as i64 + 1],
                format!("box type {} used {used} times, {} available", t + 1, bt.count),
            ));
        }
    }
    None
}

fn fill_ratio(inst: &ContainerInstance, boxes: &[Cuboid]) -> f64 {
    let placed: u64 = boxes.iter().map(|b| inst.box_types[b.type_index].volume()).sum();
    placed as f64 / inst.volume() as f64
}

fn box_type_index(inst: &ContainerInstance, i: usize, box_type: i64) -> Result<usize, RawOutcome> {
    if box_type < 1 || box_type > inst.box_types.len() as i64 {
        return Err(RawOutcome::infeasible(
            Constraint::BoxType,
            vec![i as i64],
            format!(
                "placement {i} uses box type {box_type}, valid types are 1..{}",
                inst.box_types.len()
            ),
        ));
    }
    Ok(box_type as usize - 1)
}

/// Plain container loading with seven-integer placements; entities are placement indices.
pub fn evaluate_container(inst: &ContainerInstance, sol: &ContainerSolution) -> RawOutcome {
    let mut boxes = Vec::with_capacity(sol.placements.len());
    for (i, p) in sol.placements.iter().enumerate() {
        let t = match box_type_index(inst, i, p.box_type) {
            Ok(t) => t,
            Err(out) => return out,
        };
        if p.container_id != 1 {
            return RawOutcome::infeasible(
                Constraint::ContainerId,
                vec![i as i64],
                format!("placement {i} names container {}, only container 1 exists", p.container_id),
            );
        }
        let bt = &inst.box_types[t];
        if !(0..=2).contains(&p.v) || !(0..=1).contains(&p.hswap) || bt.flags[p.v as usize] != 1 {
            return RawOutcome::infeasible(
                Constraint::Orientation,
                vec![i as i64],
                format!(
                    "placement {i} uses v={} hswap={}, allowed vertical flags are {:?}",
                    p.v, p.hswap, bt.flags
                ),
            );
        }
        boxes.push(Cuboid {
            type_index: t,
            origin: [p.x, p.y, p.z],
            size: oriented_size(bt.dims, p.v as usize, p.hswap == 1),
        });
    }
    if let Some(v) = check_bounds(inst, &boxes)
        .or_else(|| check_overlap(&boxes))
        .or_else(|| check_counts(inst, &boxes))
    {
        return v;
    }
    RawOutcome::feasible(fill_ratio(inst, &boxes))
}

/// Container loading with support and load-bearing rules; orientations are 1-based.
pub fn evaluate_container_weight(inst: &ContainerInstance, sol: &ContainerWeightSolution) -> RawOutcome {
    let mut boxes = Vec::with_capacity(sol.placements.len());
    let mut orientations = Vec::with_capacity(sol.placements.len());
    for (i, p) in sol.placements.iter().enumerate() {
        let t = match box_type_index(inst, i, p.box_type) {
            Ok(t) => t,
            Err(out) => return out,
        };
        let bt = &inst.box_types[t];
        if !(1..=3).contains(&p.orientation) || bt.flags[p.orientation as usize - 1] != 1 {
            return RawOutcome::infeasible(
                Constraint::Orientation,
                vec![i as i64],
                format!(
                    "placement {i} uses orientation {}, allowed flags are {:?}",
                    p.orientation, bt.flags
                ),
            );
        }
        boxes.push(Cuboid {
            type_index: t,
            origin: [p.x, p.y, p.z],
            size: oriented_size(bt.dims, p.orientation as usize - 1, false),
        });
        orientations.push(p.orientation as usize);
    }
    if let Some(v) = check_bounds(inst, &boxes)
        .or_else(|| check_overlap(&boxes))
        .or_else(|| check_counts(inst, &boxes))
    {
        return v;
    }

    // supporter[i] = the single box whose top face carries box i
    let mut supporter: Vec<Option<usize>> = vec![None; boxes.len()];
    for (i, b) in boxes.iter().enumerate() {
        if b.origin[2] == 0 {
            continue;
        }
        let found = boxes
            .iter()
            .enumerate()
            .find(|(j, below)| *j != i && below.top() == b.origin[2] && b.footprint_within(below));
        match found {
            Some((j, _)) => supporter[i] = Some(j),
            None => {
                return RawOutcome::infeasible(
                    Constraint::Unsupported,
                    vec![i as i64],
                    format!(
                        "placement {i} at height {} does not rest fully on a single box",
                        b.origin[2]
                    ),
                )
            }
        }
    }

    let weight = |i: usize| inst.box_types[boxes[i].type_index].weight.unwrap_or(0.0);
    let mut carried = vec![0.0f64; boxes.len()];
    for i in 0..boxes.len() {
        let w = weight(i);
        // supporters sit strictly lower, so the chain ends at the floor
        let mut cur = supporter[i];
        while let Some(s) = cur {
            carried[s] += w;
            cur = supporter[s];
        }
    }
    for (i, load) in carried.iter().enumerate() {
        let limit = inst.box_types[boxes[i].type_index]
            .load_limit(orientations[i])
            .unwrap_or(f64::INFINITY);
        if *load > limit + TOLERANCE {
            return RawOutcome::infeasible(
                Constraint::LoadBearing,
                vec![i as i64],
                format!("placement {i} carries {load}, its limit in orientation {} is {limit}", orientations[i]),
            );
        }
    }
    RawOutcome::feasible(fill_ratio(inst, &boxes))
}
