use super::{permutations, Verdict};
use crate::problem::{CandidateSolution, RcspInstance, RcspSolution, SizeBounds};

/// Every simple path shape `1, (ordered subset of 2..n-1), n`, plus the lone `[1]`.
pub(super) fn enumerate(
    inst: &RcspInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    if inst.n > SizeBounds::RCSP_VERTICES || inst.k > SizeBounds::RCSP_RESOURCES {
        return Err(format!(
            "n={} K={} exceeds n<={} K<={}",
            inst.n,
            inst.k,
            SizeBounds::RCSP_VERTICES,
            SizeBounds::RCSP_RESOURCES
        ));
    }
    let n = inst.n as u32;
    let middle: Vec<u32> = (2..n).collect();
    let mut visited = 0;
    let mut emit = |path: Vec<u32>| {
        let verdict = judge(inst, &path);
        let path = path.into_iter().map(i64::from).collect();
        visit(&CandidateSolution::Rcsp(RcspSolution { path }), verdict);
        visited += 1;
    };
    emit(vec![1]);
    for mask in 0u32..(1 << middle.len()) {
        let subset: Vec<u32> = middle
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| *v)
            .collect();
        for order in permutations(&subset) {
            let mut path = vec![1];
            path.extend(order);
            path.push(n);
            emit(path);
        }
    }
    Ok(visited)
}

fn judge(inst: &RcspInstance, path: &[u32]) -> Verdict {
    if path.first() != Some(&1) || path.last() != Some(&(inst.n as u32)) {
        return None;
    }
    let mut totals: Vec<f64> = vec![0.0; inst.k];
    for v in path {
        for k in 0..inst.k {
            totals[k] += inst.vertex_resources[*v as usize - 1][k];
        }
    }
    let mut cost = 0.0;
    for pair in path.windows(2) {
        let arcs = inst.graph.get(&pair[0])?;
        let arc = arcs.iter().find(|a| a.end == pair[1])?;
        cost += arc.cost;
        for k in 0..inst.k {
            totals[k] += arc.resources[k];
        }
    }
    for k in 0..inst.k {
        if totals[k] < inst.lower_bounds[k] || totals[k] > inst.upper_bounds[k] {
            return None;
        }
    }
    Some(cost)
}
