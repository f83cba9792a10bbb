use std::collections::BTreeSet;

use super::{Constraint, RawOutcome, TOLERANCE};
use crate::problem::{PvrpInstance, PvrpSolution};

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn evaluate_pvrp(inst: &PvrpInstance, sol: &PvrpSolution) -> RawOutcome {
    let n = inst.customers.len() as i64;
    let days = inst.period_length as i64;

    for id in sol.selected_schedules.keys() {
        if *id < 1 || *id > n {
            return RawOutcome::infeasible(
                Constraint::Malformed,
                vec![*id],
                format!("selected_schedules names customer {id}, valid ids are 1..{n}"),
            );
        }
    }
    for day in sol.tours.keys() {
        if *day < 1 || *day > days {
            return RawOutcome::infeasible(
                Constraint::Malformed,
                vec![*day],
                format!("tours names day {day}, valid days are 1..{days}"),
            );
        }
    }

    for id in 1..=n {
        let candidates = &inst.customers[id as usize - 1].schedules;
        let Some(chosen) = sol.selected_schedules.get(&id) else {
            return RawOutcome::infeasible(
                Constraint::ScheduleChoice,
                vec![id],
                format!("customer {id} has no selected schedule"),
            );
        };
        let matches = candidates
            .iter()
            .any(|c| c.len() == chosen.len() && c.iter().zip(chosen).all(|(a, b)| *a as i64 == *b));
        if !matches {
            return RawOutcome::infeasible(
                Constraint::ScheduleChoice,
                vec![id],
                format!("customer {id} selected {chosen:?}, which is not one of its candidates"),
            );
        }
    }

    for (day, tours) in &sol.tours {
        for (t, tour) in tours.iter().enumerate() {
            let tour_no = t as i64 + 1;
            let shape = |detail: String| {
                RawOutcome::infeasible(Constraint::TourShape, vec![*day, tour_no], detail)
            };
            if tour.len() < 2 || tour[0] != 0 || tour[tour.len() - 1] != 0 {
                return shape(format!("day {day} tour {tour_no} must start and end at depot 0"));
            }
            let interior = &tour[1..tour.len() - 1];
            let mut seen = BTreeSet::new();
            for c in interior {
                if *c == 0 {
                    return shape(format!("day {day} tour {tour_no} revisits the depot"));
                }
                if *c < 1 || *c > n {
                    return shape(format!("day {day} tour {tour_no} visits unknown customer {c}"));
                }
                if !seen.insert(*c) {
                    return shape(format!("day {day} tour {tour_no} repeats customer {c}"));
                }
            }
        }
    }

    for (day, tours) in &sol.tours {
        for (t, tour) in tours.iter().enumerate() {
            let load: f64 = tour[1..tour.len() - 1]
                .iter()
                .map(|c| inst.customers[*c as usize - 1].demand)
                .sum();
            if load > inst.vehicle_capacity + TOLERANCE {
                return RawOutcome::infeasible(
                    Constraint::Capacity,
                    vec![*day, t as i64 + 1],
                    format!(
                        "day {day} tour {} carries {load}, capacity is {}",
                        t + 1,
                        inst.vehicle_capacity
                    ),
                );
            }
        }
    }

    for day in 1..=days {
        let d = day as usize - 1;
        let mut visited: Vec<i64> = sol
            .tours
            .get(&day)
            .map(|ts| ts.iter().flat_map(|t| t[1..t.len() - 1].iter().copied()).collect())
            .unwrap_or_default();
        visited.sort_unstable();
        for w in visited.windows(2) {
            if w[0] == w[1] {
                return RawOutcome::infeasible(
                    Constraint::Coverage,
                    vec![day, w[0]],
                    format!("customer {} is visited more than once on day {day}", w[0]),
                );
            }
        }
        for id in 1..=n {
            let required = sol.selected_schedules[&id][d] == 1;
            let present = visited.binary_search(&id).is_ok();
            if required != present {
                let what = if required {
                    "is not visited although its schedule requires it"
                } else {
                    "is visited although its schedule does not include the day"
                };
                return RawOutcome::infeasible(
                    Constraint::Coverage,
                    vec![day, id],
                    format!("customer {id} {what} on day {day}"),
                );
            }
        }
    }

    for day in 1..=days {
        let used = sol.tours.get(&day).map_or(0, Vec::len);
        let allowed = inst.vehicles_per_day[day as usize - 1] as usize;
        if used > allowed {
            return RawOutcome::infeasible(
                Constraint::VehicleCount,
                vec![day],
                format!("day {day} uses {used} tours, {allowed} vehicles available"),
            );
        }
    }

    let total = sol
        .tours
        .values()
        .flatten()
        .map(|tour| {
            tour.windows(2)
                .map(|w| dist(inst.coords(w[0] as usize), inst.coords(w[1] as usize)))
                .sum::<f64>()
        })
        .sum();
    RawOutcome::feasible(total)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::problem::PvrpCustomer;

    fn inst(capacity: f64, demand: f64) -> PvrpInstance {
        PvrpInstance {
            depot: [0.0, 0.0],
            customers: vec![PvrpCustomer {
                coords: [3.0, 4.0],
                demand,
                schedules: vec![vec![1]],
            }],
            period_length: 1,
            vehicles_per_day: vec![1],
            vehicle_capacity: capacity,
        }
    }

    fn sol(tours: Vec<Vec<i64>>) -> PvrpSolution {
        PvrpSolution {
            selected_schedules: BTreeMap::from([(1, vec![1])]),
            tours: BTreeMap::from([(1, tours)]),
        }
    }

    #[test]
    fn single_customer_round_trip() {
        assert_eq!(evaluate_pvrp(&inst(10.0, 1.0), &sol(vec![vec![0, 1, 0]])), RawOutcome::feasible(10.0));
    }

    #[test]
    fn missing_visit_is_coverage() {
        let out = evaluate_pvrp(&inst(10.0, 1.0), &sol(vec![]));
        assert_eq!(out.violation().unwrap().constraint, Constraint::Coverage);
    }

    #[test]
    fn overloaded_tour_is_capacity() {
        let out = evaluate_pvrp(&inst(10.0, 11.0), &sol(vec![vec![0, 1, 0]]));
        assert_eq!(out.violation().unwrap().constraint, Constraint::Capacity);
    }

    #[test]
    fn shape_and_vehicle_checks() {
        let out = evaluate_pvrp(&inst(10.0, 1.0), &sol(vec![vec![1, 0]]));
        assert_eq!(out.violation().unwrap().constraint, Constraint::TourShape);
        let out = evaluate_pvrp(&inst(10.0, 1.0), &sol(vec![vec![0, 1, 0], vec![0, 0]]));
        assert_eq!(out.violation().unwrap().constraint, Constraint::VehicleCount);
        let mut bad = sol(vec![vec![0, 1, 0]]);
        bad.selected_schedules.insert(1, vec![0]);
        let out = evaluate_pvrp(&inst(10.0, 1.0), &bad);
        assert_eq!(out.violation().unwrap().constraint, Constraint::ScheduleChoice);
    }
}
