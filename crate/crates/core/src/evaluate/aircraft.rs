use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{AircraftLandingInstance, AircraftSolution};

pub fn evaluate_aircraft(inst: &AircraftLandingInstance, sol: &AircraftSolution) -> RawOutcome {
    let p = inst.num_planes as i64;
    for id in sol.schedule.keys() {
        if *id < 1 || *id > p {
            return RawOutcome::infeasible(
                Constraint::Malformed,
                vec![*id],
                format!("schedule names plane {id}, valid ids are 1..{p}"),
            );
        }
    }
    if let Some(missing) = (1..=p).find(|id| !sol.schedule.contains_key(id)) {
        return RawOutcome::infeasible(
            Constraint::Malformed,
            vec![missing],
            format!("plane {missing} has no schedule entry"),
        );
    }

    let landings: Vec<(f64, f64)> = sol
        .schedule
        .values()
        .map(|l| (l.landing_time, l.runway))
        .collect();

    for (i, (t, runway)) in landings.iter().enumerate() {
        let plane = &inst.planes[i];
        let id = i as i64 + 1;
        if *t < plane.earliest - TOLERANCE || *t > plane.latest + TOLERANCE {
            return RawOutcome::infeasible(
                Constraint::TimeWindow,
                vec![id],
                format!(
                    "plane {id} lands at {t}, outside [{}, {}]",
                    plane.earliest, plane.latest
                ),
            );
        }
        if runway.fract() != 0.0 || *runway < 1.0 || *runway > inst.num_runways as f64 {
            return RawOutcome::infeasible(
                Constraint::Runway,
                vec![id],
                format!(
                    "plane {id} uses runway {runway}, valid runways are 1..{}",
                    inst.num_runways
                ),
            );
        }
    }

    for i in 0..landings.len() {
        for j in i + 1..landings.len() {
            let ((ti, ri), (tj, rj)) = (landings[i], landings[j]);
            if ri != rj {
                continue;
            }
            // both directions apply when the times coincide
            let mut needs = Vec::new();
            if ti <= tj {
                needs.push((i, j, tj - ti));
            }
            if tj <= ti {
                needs.push((j, i, ti - tj));
            }
            for (first, second, gap) in needs {
                let sep = inst.separation[first][second];
                if gap < sep - TOLERANCE {
                    return RawOutcome::infeasible(
                        Constraint::Separation,
                        vec![first as i64 + 1, second as i64 + 1],
                        format!(
                            "planes {} and {} on runway {ri} are {gap} apart, need {sep}",
                            first + 1,
                            second + 1
                        ),
                    );
                }
            }
        }
    }

    let cost = landings
        .iter()
        .zip(&inst.planes)
        .map(|((t, _), plane)| {
            plane.penalty_early * (plane.target - t).max(0.0)
                + plane.penalty_late * (t - plane.target).max(0.0)
        })
        .sum();
    RawOutcome::feasible(cost)
}
