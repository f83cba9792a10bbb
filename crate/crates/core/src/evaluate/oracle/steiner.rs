use super::Verdict;
use crate::problem::{CandidateSolution, SizeBounds, SteinerInstance, SteinerSolution};

/// Kruskal over the complete graph with a union-find.
fn kruskal(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut edges = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut total = 0.0;
    for (d, i, j) in edges {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += d;
        }
    }
    total
}

/// Geometric median of three points by Weiszfeld iteration.
fn fermat_point(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let pts = [a, b, c];
    let mut p = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
    for _ in 0..500 {
        let mut num = [0.0, 0.0];
        let mut den = 0.0;
        for q in pts {
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            if d < 1e-12 {
                return q;
            }
            num[0] += q[0] / d;
            num[1] += q[1] / d;
            den += 1.0 / d;
        }
        let next = [num[0] / den, num[1] / den];
        let moved = (next[0] - p[0]).hypot(next[1] - p[1]);
        p = next;
        if moved < 1e-15 {
            break;
        }
    }
    p
}

/// Candidate points: Fermat points of terminal triples, a 4x4 grid over the
/// bounding box, and one far-away point that can only lengthen the tree.
fn candidate_points(terminals: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let n = terminals.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push(fermat_point(terminals[i], terminals[j], terminals[k]));
            }
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in terminals {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    for gy in 0..4 {
        for gx in 0..4 {
            out.push([
                lo[0] + (hi[0] - lo[0]) * gx as f64 / 3.0,
                lo[1] + (hi[1] - lo[1]) * gy as f64 / 3.0,
            ]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
    out.push([hi[0] + 3.0 * span, hi[1] + 3.0 * span]);
    out
}

/// The empty set, every single candidate and every pair of candidates.
pub(super) fn enumerate(
    inst: &SteinerInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    if inst.points.len() > SizeBounds::STEINER_TERMINALS {
        return Err(format!(
            "{} terminals exceeds {}",
            inst.points.len(),
            SizeBounds::STEINER_TERMINALS
        ));
    }
    let base = kruskal(&inst.points);
    let cands = candidate_points(&inst.points);
    let mut visited = 0;
    let mut emit = |extra: Vec<[f64; 2]>| {
        let verdict = if extra.is_empty() {
            Some(0.0)
        } else {
            let mut all = inst.points.clone();
            all.extend_from_slice(&extra);
            let len = kruskal(&all);
            (len <= base + 1e-9).then(|| (1.0 - len / base).max(0.0))
        };
        visit(
            &CandidateSolution::EuclideanSteiner(SteinerSolution { steiner_points: extra }),
            verdict,
        );
        visited += 1;
    };
    emit(Vec::new());
    for i in 0..cands.len() {
        emit(vec![cands[i]]);
    }
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            emit(vec![cands[i], cands[j]]);
        }
    }
    Ok(visited)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fermat_point_of_equilateral_triangle_is_centroid() {
        let h = 3f64.sqrt() / 2.0;
        let p = fermat_point([0.0, 0.0], [1.0, 0.0], [0.5, h]);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - h / 3.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn kruskal_of_unit_square() {
        assert!((kruskal(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]) - 3.0).abs() < 1e-12);
    }
}
