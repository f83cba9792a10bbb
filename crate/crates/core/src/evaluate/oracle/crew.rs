use super::{ordered_partitions, Verdict};
use crate::problem::{CandidateSolution, CrewInstance, CrewSolution, SizeBounds};

/// Every split of the tasks into non-empty ordered crews (crew count unbounded).
pub(super) fn enumerate(
    inst: &CrewInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    if inst.n > SizeBounds::CREW_TASKS {
        return Err(format!("{} tasks exceeds {}", inst.n, SizeBounds::CREW_TASKS));
    }
    let tasks: Vec<u32> = (1..=inst.n as u32).collect();
    let mut visited = 0;
    for crews in ordered_partitions(&tasks, inst.n) {
        let verdict = judge(inst, &crews);
        let crews = crews
            .into_iter()
            .map(|c| c.into_iter().map(i64::from).collect())
            .collect();
        visit(&CandidateSolution::CrewScheduling(CrewSolution { crews }), verdict);
        visited += 1;
    }
    Ok(visited)
}

fn judge(inst: &CrewInstance, crews: &[Vec<u32>]) -> Verdict {
    if crews.len() > inst.k {
        return None;
    }
    let mut cost = 0.0;
    for crew in crews {
        let span = inst.tasks[crew.last()?].1 - inst.tasks[&crew[0]].0;
        if span > inst.time_limit {
            return None;
        }
        for pair in crew.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if inst.tasks[&a].1 > inst.tasks[&b].0 {
                return None;
            }
            let arc = inst.arcs.iter().find(|x| x.from == a && x.to == b)?;
            cost += arc.cost;
        }
    }
    Some(cost)
}
