//! Voxel-grid oracles for both container variants.

use super::{odometer, Verdict};
use crate::problem::{
    CandidateSolution, ContainerInstance, ContainerSolution, ContainerWeightSolution, Placement,
    SizeBounds, WeightPlacement,
};

/// Occupancy grid; each cell stores the index of the box filling it.
struct Grid {
    dims: [i64; 3],
    cells: Vec<Option<usize>>,
}

impl Grid {
    fn new(container: [u32; 3]) -> Self {
        let dims = container.map(|d| d as i64);
        Grid {
            dims,
            cells: vec![None; (dims[0] * dims[1] * dims[2]) as usize],
        }
    }

    fn index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        let inside = x >= 0 && y >= 0 && z >= 0 && x < self.dims[0] && y < self.dims[1] && z < self.dims[2];
        inside.then(|| ((z * self.dims[1] + y) * self.dims[0] + x) as usize)
    }

    /// Marks a box; false if any unit cell is outside or already taken.
    fn fill(&mut self, id: usize, at: [i64; 3], extent: [i64; 3]) -> bool {
        for z in at[2]..at[2] + extent[2] {
            for y in at[1]..at[1] + extent[1] {
                for x in at[0]..at[0] + extent[0] {
                    match self.index(x, y, z) {
                        Some(i) if self.cells[i].is_none() => self.cells[i] = Some(id),
                        _ => return false,
                    }
                }
            }
        }
        true
    }

    fn used_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.is_some()).count() as f64 / self.cells.len() as f64
    }
}

/// Horizontal extents: the two non-vertical sides, lower index first, optionally swapped.
fn extent(dims: [u32; 3], vertical: usize, swap: bool) -> [i64; 3] {
    let mut horiz = [0i64; 2];
    let mut k = 0;
    for (i, d) in dims.iter().enumerate() {
        if i != vertical {
            horiz[k] = *d as i64;
            k += 1;
        }
    }
    if swap {
        horiz.swap(0, 1);
    }
    [horiz[0], horiz[1], dims[vertical] as i64]
}

/// One unit per available box copy, each either left out or placed.
fn units(inst: &ContainerInstance) -> Vec<usize> {
    inst.box_types
        .iter()
        .enumerate()
        .flat_map(|(t, b)| std::iter::repeat_n(t, b.count as usize))
        .collect()
}

fn positions(container: [u32; 3]) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for z in 0..container[2] as i64 {
        for y in 0..container[1] as i64 {
            for x in 0..container[0] as i64 {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Every unit is absent or placed at any grid corner with any of the six
/// (vertical side, swap) orientations, allowed or not.
pub(super) fn enumerate_plain(
    inst: &ContainerInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    let total: u64 = inst.box_types.iter().map(|b| b.count as u64).sum();
    if inst.container.iter().any(|d| *d > SizeBounds::CONTAINER_DIM) || total > SizeBounds::CONTAINER_BOXES as u64 {
        return Err(format!(
            "container {:?} with {total} boxes exceeds sides of {} and {} boxes",
            inst.container,
            SizeBounds::CONTAINER_DIM,
            SizeBounds::CONTAINER_BOXES
        ));
    }
    let units = units(inst);
    let mut choices: Vec<Option<([i64; 3], usize, bool)>> = vec![None];
    for pos in positions(inst.container) {
        for v in 0..3 {
            for swap in [false, true] {
                choices.push(Some((pos, v, swap)));
            }
        }
    }
    let radix = vec![choices.len(); units.len()];
    let mut visited = 0;
    odometer(&radix, |digits| {
        let mut placements = Vec::new();
        let mut grid = Grid::new(inst.container);
        let mut ok = true;
        for (u, d) in digits.iter().enumerate() {
            let Some((pos, v, swap)) = choices[*d] else { continue };
            let t = units[u];
            let bt = &inst.box_types[t];
            placements.push(Placement {
                box_type: t as i64 + 1,
                container_id: 1,
                x: pos[0],
                y: pos[1],
                z: pos[2],
                v: v as i64,
                hswap: swap as i64,
            });
            ok = ok && bt.flags[v] == 1 && grid.fill(u, pos, extent(bt.dims, v, swap));
        }
        let verdict = ok.then(|| grid.used_fraction());
        visit(&CandidateSolution::ContainerLoading(ContainerSolution { placements }), verdict);
        visited += 1;
    });
    Ok(visited)
}

/// Every unit is absent or placed at any grid corner in orientation 1, 2 or 3.
pub(super) fn enumerate_weight(
    inst: &ContainerInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    let total: u64 = inst.box_types.iter().map(|b| b.count as u64).sum();
    let [l, w, h] = inst.container;
    if l > SizeBounds::WEIGHT_FLOOR_DIM
        || w > SizeBounds::WEIGHT_FLOOR_DIM
        || h > SizeBounds::WEIGHT_HEIGHT
        || total > SizeBounds::WEIGHT_BOXES as u64
    {
        return Err(format!(
            "container {:?} with {total} boxes exceeds the weighted small-class bounds",
            inst.container
        ));
    }
    let units = units(inst);
    let mut choices: Vec<Option<([i64; 3], usize)>> = vec![None];
    for pos in positions(inst.container) {
        for o in 1..=3 {
            choices.push(Some((pos, o)));
        }
    }
    let radix = vec![choices.len(); units.len()];
    let mut visited = 0;
    odometer(&radix, |digits| {
        let mut placements = Vec::new();
        let mut placed = Vec::new();
        for (u, d) in digits.iter().enumerate() {
            let Some((pos, o)) = choices[*d] else { continue };
            placements.push(WeightPlacement {
                box_type: units[u] as i64 + 1,
                orientation: o as i64,
                x: pos[0],
                y: pos[1],
                z: pos[2],
            });
            placed.push((units[u], pos, o));
        }
        let verdict = judge_weight(inst, &placed);
        visit(
            &CandidateSolution::ContainerLoadingWeight(ContainerWeightSolution { placements }),
            verdict,
        );
        visited += 1;
    });
    Ok(visited)
}

fn judge_weight(inst: &ContainerInstance, placed: &[(usize, [i64; 3], usize)]) -> Verdict {
    let mut grid = Grid::new(inst.container);
    let mut extents = Vec::with_capacity(placed.len());
    for (id, (t, pos, o)) in placed.iter().enumerate() {
        let bt = &inst.box_types[*t];
        if bt.flags[o - 1] != 1 {
            return None;
        }
        let ext = extent(bt.dims, o - 1, false);
        if !grid.fill(id, *pos, ext) {
            return None;
        }
        extents.push(ext);
    }
    // the layer right below a lifted box must belong entirely to one box
    let mut below: Vec<Option<usize>> = vec![None; placed.len()];
    for (id, (_, pos, _)) in placed.iter().enumerate() {
        if pos[2] == 0 {
            continue;
        }
        let ext = extents[id];
        let mut owner: Option<usize> = None;
        for y in pos[1]..pos[1] + ext[1] {
            for x in pos[0]..pos[0] + ext[0] {
                let cell = grid.cells[grid.index(x, y, pos[2] - 1)?]?;
                if owner.is_some_and(|o| o != cell) {
                    return None;
                }
                owner = Some(cell);
            }
        }
        below[id] = owner;
    }
    fn stacked(id: usize, below: &[Option<usize>], weights: &[f64]) -> f64 {
        below
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == Some(id))
            .map(|(top, _)| weights[top] + stacked(top, below, weights))
            .sum()
    }
    let weights: Vec<f64> = placed
        .iter()
        .map(|(t, _, _)| inst.box_types[*t].weight.unwrap_or(0.0))
        .collect();
    for (id, (t, _, o)) in placed.iter().enumerate() {
        let bt = &inst.box_types[*t];
        let limit = [bt.lb1, bt.lb2, bt.lb3][o - 1].unwrap_or(f64::INFINITY);
        if stacked(id, &below, &weights) > limit {
            return None;
        }
    }
    Some(grid.used_fraction())
}
