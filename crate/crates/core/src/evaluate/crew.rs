use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{CrewInstance, CrewSolution};

/// Entities are 1-based crew numbers or task ids.
pub fn evaluate_crew(inst: &CrewInstance, sol: &CrewSolution) -> RawOutcome {
    let n = inst.n as i64;
    for crew in &sol.crews {
        if let Some(t) = crew.iter().find(|t| **t < 1 || **t > n) {
            return RawOutcome::infeasible(
                Constraint::TaskCoverage,
                vec![*t],
                format!("task {t} does not exist, valid ids are 1..{n}"),
            );
        }
    }

    for (c, crew) in sol.crews.iter().enumerate() {
        let crew_no = c as i64 + 1;
        if crew.is_empty() {
            return RawOutcome::infeasible(Constraint::EmptyCrew, vec![crew_no], format!("crew {crew_no} has no tasks"));
        }
        for w in crew.windows(2) {
            let (_, finish) = inst.tasks[&(w[0] as u32)];
            let (start, _) = inst.tasks[&(w[1] as u32)];
            if finish > start + TOLERANCE {
                return RawOutcome::infeasible(
                    Constraint::Overlap,
                    vec![w[0], w[1]],
                    format!(
                        "crew {crew_no}: task {} finishes at {finish} after task {} starts at {start}",
                        w[0], w[1]
                    ),
                );
            }
            if inst.transition(w[0] as u32, w[1] as u32).is_none() {
                return RawOutcome::infeasible(
                    Constraint::MissingTransition,
                    vec![w[0], w[1]],
                    format!("crew {crew_no}: no arc from task {} to task {}", w[0], w[1]),
                );
            }
        }
        let first_start = inst.tasks[&(crew[0] as u32)].0;
        let last_finish = inst.tasks[&(*crew.last().unwrap() as u32)].1;
        let duty = last_finish - first_start;
        if duty > inst.time_limit + TOLERANCE {
            return RawOutcome::infeasible(
                Constraint::DutyTime,
                vec![crew_no],
                format!("crew {crew_no} is on duty for {duty}, limit is {}", inst.time_limit),
            );
        }
    }

    let mut seen = vec![0u32; inst.n + 1];
    for t in sol.crews.iter().flatten() {
        seen[*t as usize] += 1;
    }
    if let Some(t) = (1..=inst.n).find(|t| seen[*t] != 1) {
        let detail = if seen[t] == 0 {
            format!("task {t} is not assigned")
        } else {
            format!("task {t} is assigned {} times", seen[t])
        };
        return RawOutcome::infeasible(Constraint::TaskCoverage, vec![t as i64], detail);
    }
    if sol.crews.len() > inst.k {
        return RawOutcome::infeasible(
            Constraint::CrewLimit,
            vec![sol.crews.len() as i64],
            format!("{} crews used, at most {} allowed", sol.crews.len(), inst.k),
        );
    }

    let cost = sol
        .crews
        .iter()
        .flat_map(|crew| crew.windows(2))
        .map(|w| inst.transition(w[0] as u32, w[1] as u32).unwrap())
        .sum();
    RawOutcome::feasible(cost)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::problem::CrewArc;

    fn two_tasks(second_start: f64, k: usize) -> CrewInstance {
        CrewInstance {
            n: 2,
            k,
            time_limit: 100.0,
            tasks: BTreeMap::from([(1, (0.0, 5.0)), (2, (second_start, second_start + 5.0))]),
            arcs: vec![CrewArc {
                from: 1,
                to: 2,
                cost: 7.0,
            }],
        }
    }

    #[test]
    fn chained_tasks() {
        let sol = CrewSolution { crews: vec![vec![1, 2]] };
        assert_eq!(evaluate_crew(&two_tasks(6.0, 1), &sol), RawOutcome::feasible(7.0));
    }

    #[test]
    fn overlapping_tasks() {
        let sol = CrewSolution { crews: vec![vec![1, 2]] };
        let out = evaluate_crew(&two_tasks(3.0, 1), &sol);
        assert_eq!(out.violation().unwrap().constraint, Constraint::Overlap);
    }

    #[test]
    fn too_many_crews() {
        let sol = CrewSolution { crews: vec![vec![1], vec![2]] };
        let out = evaluate_crew(&two_tasks(6.0, 1), &sol);
        assert_eq!(out.violation().unwrap().constraint, Constraint::CrewLimit);
        assert!(evaluate_crew(&two_tasks(6.0, 2), &sol).is_feasible());
    }

    #[test]
    fn coverage_and_empty() {
        let out = evaluate_crew(&two_tasks(6.0, 2), &CrewSolution { crews: vec![vec![1]] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::TaskCoverage);
        let out = evaluate_crew(&two_tasks(6.0, 3), &CrewSolution { crews: vec![vec![1], vec![], vec![2]] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::EmptyCrew);
        let out = evaluate_crew(&two_tasks(6.0, 1), &CrewSolution { crews: vec![vec![2, 1]] });
        assert_eq!(out.violation().unwrap().constraint, Constraint::Overlap);
    }
}
