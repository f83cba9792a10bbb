use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{RcspInstance, RcspSolution};

/// Entities are path positions (0-based) or the 1-based resource index.
pub fn evaluate_rcsp(inst: &RcspInstance, sol: &RcspSolution) -> RawOutcome {
    let n = inst.n as i64;
    let path = &sol.path;
    if let Some((pos, v)) = path.iter().enumerate().find(|(_, v)| **v < 1 || **v > n) {
        return RawOutcome::infeasible(
            Constraint::Malformed,
            vec![pos as i64],
            format!("path position {pos} names vertex {v}, valid vertices are 1..{n}"),
        );
    }
    if path.first() != Some(&1) {
        return RawOutcome::infeasible(Constraint::PathStart, vec![0], "path must start at vertex 1");
    }
    if path.last() != Some(&n) {
        return RawOutcome::infeasible(
            Constraint::PathEnd,
            vec![path.len() as i64 - 1],
            format!("path must end at vertex {n}"),
        );
    }

    let mut cost = 0.0;
    let mut used = vec![0.0; inst.k];
    for v in path {
        for (u, r) in used.iter_mut().zip(&inst.vertex_resources[*v as usize - 1]) {
            *u += r;
        }
    }
    for (pos, w) in path.windows(2).enumerate() {
        let Some(arc) = inst.arc(w[0] as u32, w[1] as u32) else {
            return RawOutcome::infeasible(
                Constraint::MissingArc,
                vec![pos as i64],
                format!("no arc {} -> {} in the graph", w[0], w[1]),
            );
        };
        cost += arc.cost;
        for (u, r) in used.iter_mut().zip(&arc.resources) {
            *u += r;
        }
    }
    for (k, u) in used.iter().enumerate() {
        let (lo, hi) = (inst.lower_bounds[k], inst.upper_bounds[k]);
        if *u < lo - TOLERANCE || *u > hi + TOLERANCE {
            return RawOutcome::infeasible(
                Constraint::Resource,
                vec![k as i64 + 1],
                format!("resource {} totals {u}, allowed range is [{lo}, {hi}]", k + 1),
            );
        }
    }
    RawOutcome::feasible(cost)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::problem::RcspArc;

    fn two_vertex(upper: f64) -> RcspInstance {
        RcspInstance {
            n: 2,
            m: 1,
            k: 1,
            lower_bounds: vec![0.0],
            upper_bounds: vec![upper],
            vertex_resources: vec![vec![1.0], vec![1.0]],
            graph: BTreeMap::from([(
                1,
                vec![RcspArc {
                    end: 2,
                    cost: 5.0,
                    resources: vec![1.0],
                }],
            )]),
        }
    }

    #[test]
    fn single_arc_path() {
        let sol = RcspSolution { path: vec![1, 2] };
        assert_eq!(evaluate_rcsp(&two_vertex(10.0), &sol), RawOutcome::feasible(5.0));
    }

    #[test]
    fn missing_arc_and_resource() {
        let back = RcspSolution { path: vec![1, 2, 1, 2] };
        assert_eq!(
            evaluate_rcsp(&two_vertex(10.0), &back).violation().unwrap().constraint,
            Constraint::MissingArc
        );
        let sol = RcspSolution { path: vec![1, 2] };
        let out = evaluate_rcsp(&two_vertex(2.0), &sol);
        let v = out.violation().unwrap();
        assert_eq!((v.constraint, v.entities.clone()), (Constraint::Resource, vec![1]));
    }

    #[test]
    fn endpoints() {
        let inst = two_vertex(10.0);
        let out = evaluate_rcsp(&inst, &RcspSolution { path: vec![2] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::PathStart);
        let out = evaluate_rcsp(&inst, &RcspSolution { path: vec![1] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::PathEnd);
        let out = evaluate_rcsp(&inst, &RcspSolution { path: vec![] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::PathStart);
    }
}
