use std::collections::BTreeMap;

use super::{odometer, ordered_partitions, Verdict};
use crate::problem::{CandidateSolution, PvrpInstance, PvrpSolution, SizeBounds};

fn check_bounds(inst: &PvrpInstance) -> Result<(), String> {
    let max_sched = inst.customers.iter().map(|c| c.schedules.len()).max().unwrap_or(0);
    if inst.customers.len() > SizeBounds::PVRP_CUSTOMERS
        || inst.period_length > SizeBounds::PVRP_PERIOD
        || max_sched > SizeBounds::PVRP_SCHEDULES
    {
        return Err(format!(
            "{} customers, {} days, up to {} schedules exceeds {} / {} / {}",
            inst.customers.len(),
            inst.period_length,
            max_sched,
            SizeBounds::PVRP_CUSTOMERS,
            SizeBounds::PVRP_PERIOD,
            SizeBounds::PVRP_SCHEDULES
        ));
    }
    Ok(())
}

fn leg(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn point(inst: &PvrpInstance, v: usize) -> [f64; 2] {
    if v == 0 {
        inst.depot
    } else {
        inst.customers[v - 1].coords
    }
}

/// One day's tours: length when every tour fits the vehicle, `None` otherwise.
fn day_cost(inst: &PvrpInstance, tours: &[Vec<usize>]) -> Option<f64> {
    let mut total = 0.0;
    for tour in tours {
        let load: f64 = tour.iter().map(|c| inst.customers[c - 1].demand).sum();
        if load > inst.vehicle_capacity {
            return None;
        }
        let mut prev = 0;
        for c in tour.iter().copied().chain(std::iter::once(0)) {
            total += leg(point(inst, prev), point(inst, c));
            prev = c;
        }
    }
    Some(total)
}

fn required(inst: &PvrpInstance, picks: &[usize], day: usize) -> Vec<usize> {
    (1..=inst.customers.len())
        .filter(|c| inst.customers[c - 1].schedules[picks[c - 1]][day] == 1)
        .collect()
}

/// Day-by-day tour options: every split of the day's customers into at most
/// `vehicles + 1` ordered tours, so fleet-size violations are included.
fn day_options(inst: &PvrpInstance, picks: &[usize]) -> Vec<Vec<Vec<Vec<usize>>>> {
    (0..inst.period_length)
        .map(|d| {
            let need = required(inst, picks, d);
            ordered_partitions(&need, inst.vehicles_per_day[d] as usize + 1)
        })
        .collect()
}

fn build(inst: &PvrpInstance, picks: &[usize], days: &[&Vec<Vec<usize>>]) -> CandidateSolution {
    let selected_schedules = picks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let bits = inst.customers[i].schedules[*s].iter().map(|b| *b as i64).collect();
            (i as i64 + 1, bits)
        })
        .collect();
    let tours: BTreeMap<i64, Vec<Vec<i64>>> = days
        .iter()
        .enumerate()
        .map(|(d, ts)| {
            let list = ts
                .iter()
                .map(|t| {
                    std::iter::once(0)
                        .chain(t.iter().map(|c| *c as i64))
                        .chain(std::iter::once(0))
                        .collect()
                })
                .collect();
            (d as i64 + 1, list)
        })
        .collect();
    CandidateSolution::PeriodicVehicleRouting(PvrpSolution {
        selected_schedules,
        tours,
    })
}

pub(super) fn enumerate(
    inst: &PvrpInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    check_bounds(inst)?;
    let sched_radix: Vec<usize> = inst.customers.iter().map(|c| c.schedules.len()).collect();
    let mut visited = 0;
    odometer(&sched_radix, |picks| {
        let options = day_options(inst, picks);
        let radix: Vec<usize> = options.iter().map(Vec::len).collect();
        odometer(&radix, |digits| {
            let days: Vec<&Vec<Vec<usize>>> = digits.iter().enumerate().map(|(d, k)| &options[d][*k]).collect();
            let mut verdict = Some(0.0);
            for (d, tours) in days.iter().enumerate() {
                let fleet_ok = tours.len() <= inst.vehicles_per_day[d] as usize;
                verdict = match (verdict, fleet_ok.then(|| day_cost(inst, tours)).flatten()) {
                    (Some(acc), Some(c)) => Some(acc + c),
                    _ => None,
                };
            }
            visit(&build(inst, picks, &days), verdict);
            visited += 1;
        });
    });
    Ok(visited)
}

/// Exact optimum using the independence of days once schedules are chosen.
pub(super) fn best(inst: &PvrpInstance) -> Result<Option<(CandidateSolution, f64)>, String> {
    check_bounds(inst)?;
    let sched_radix: Vec<usize> = inst.customers.iter().map(|c| c.schedules.len()).collect();
    let mut best: Option<(CandidateSolution, f64)> = None;
    odometer(&sched_radix, |picks| {
        let options = day_options(inst, picks);
        let mut chosen = Vec::with_capacity(options.len());
        let mut total = 0.0;
        for (d, day) in options.iter().enumerate() {
            let top = day
                .iter()
                .filter(|tours| tours.len() <= inst.vehicles_per_day[d] as usize)
                .filter_map(|tours| day_cost(inst, tours).map(|c| (tours, c)))
                .fold(None::<(&Vec<Vec<usize>>, f64)>, |acc, (t, c)| match acc {
                    Some((_, b)) if b <= c => acc,
                    _ => Some((t, c)),
                });
            match top {
                Some((tours, c)) => {
                    chosen.push(tours);
                    total += c;
                }
                None => return,
            }
        }
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((build(inst, picks, &chosen), total));
        }
    });
    Ok(best)
}
