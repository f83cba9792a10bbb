use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{SteinerInstance, SteinerSolution};

/// Euclidean minimum spanning tree length (dense Prim, O(n^2)).
pub fn mst_length(points: &[[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; points.len()];
    let mut best = vec![f64::INFINITY; points.len()];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..points.len() {
        let u = (0..points.len())
            .filter(|i| !in_tree[*i])
            .min_by(|a, b| best[*a].total_cmp(&best[*b]))
            .unwrap();
        in_tree[u] = true;
        total += best[u];
        for v in 0..points.len() {
            if !in_tree[v] {
                let d = (points[u][0] - points[v][0]).hypot(points[u][1] - points[v][1]);
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    total
}

/// Relative MST reduction from adding the Steiner points; maximization.
pub fn evaluate_steiner(inst: &SteinerInstance, sol: &SteinerSolution) -> RawOutcome {
    let base = mst_length(&inst.points);
    if sol.steiner_points.is_empty() {
        return RawOutcome::feasible(0.0);
    }
    let mut all = inst.points.clone();
    all.extend_from_slice(&sol.steiner_points);
    let candidate = mst_length(&all);
    if candidate > base + TOLERANCE {
        return RawOutcome::infeasible(
            Constraint::TreeLength,
            vec![],
            format!("tree length {candidate} exceeds the terminal-only length {base}"),
        );
    }
    RawOutcome::feasible((1.0 - candidate / base).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_scores_zero() {
        let inst = SteinerInstance {
            points: vec![[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]],
        };
        let out = evaluate_steiner(&inst, &SteinerSolution { steiner_points: vec![] });
        assert_eq!(out, RawOutcome::feasible(0.0));
    }

    #[test]
    fn far_point_is_infeasible() {
        let inst = SteinerInstance {
            points: vec![[0.0, 0.0], [1.0, 0.0]],
        };
        let out = evaluate_steiner(
            &inst,
            &SteinerSolution {
                steiner_points: vec![[50.0, 50.0]],
            },
        );
        assert_eq!(out.violation().unwrap().constraint, Constraint::TreeLength);
    }

    #[test]
    fn square_mst() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!((mst_length(&sq) - 3.0).abs() < 1e-12);
    }
}
