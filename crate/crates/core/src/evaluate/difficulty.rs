//! Instance-only hardness scores and tercile binning.

use thiserror::Error;

use crate::problem::{AircraftLandingInstance, PvrpInstance};

/// Above this many schedule combinations the PVRP proxy switches to the greedy.
pub const PVRP_EXACT_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum DifficultyError {
    #[error("every landing window has zero width")]
    DegenerateWindows,
    #[error("day {day} has zero vehicle capacity")]
    ZeroCapacityDay { day: usize },
}

/// Nearest-rank percentile of a non-empty slice (`q` in (0, 1]).
pub fn nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Separation pressure: (planes per runway) times (90th-percentile separation / mean window width).
pub fn difficulty_aircraft(inst: &AircraftLandingInstance) -> Result<f64, DifficultyError> {
    let p = inst.num_planes as f64;
    let r = inst.num_runways as f64;
    let width_sum: f64 = inst.planes.iter().map(|pl| pl.latest - pl.earliest).sum();
    if width_sum <= 0.0 {
        return Err(DifficultyError::DegenerateWindows);
    }
    let mean_width = width_sum / p;
    let off_diagonal: Vec<f64> = inst
        .separation
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, s)| *s))
        .collect();
    let sep90 = if off_diagonal.is_empty() {
        0.0
    } else {
        nearest_rank(&off_diagonal, 0.9)
    };
    Ok((p * sep90) / (r * mean_width))
}

fn peak_ratio(loads: &[f64], capacities: &[f64]) -> f64 {
    loads
        .iter()
        .zip(capacities)
        .map(|(l, c)| l / c)
        .fold(0.0, f64::max)
}

/// Balanced peak load ratio: the smallest achievable max over days of load / capacity.
///
/// Exact by enumeration up to [`PVRP_EXACT_LIMIT`] schedule combinations; beyond
/// that, customers in descending demand each take the schedule that keeps the
/// running peak lowest (first such schedule on ties).
pub fn difficulty_pvrp(inst: &PvrpInstance) -> Result<f64, DifficultyError> {
    let capacities: Vec<f64> = inst
        .vehicles_per_day
        .iter()
        .map(|v| *v as f64 * inst.vehicle_capacity)
        .collect();
    if let Some(day) = capacities.iter().position(|c| *c <= 0.0) {
        return Err(DifficultyError::ZeroCapacityDay { day: day + 1 });
    }
    let combos = inst
        .customers
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.schedules.len() as u128))
        .unwrap_or(u128::MAX);
    if combos <= PVRP_EXACT_LIMIT {
        Ok(pvrp_exact(inst, &capacities))
    } else {
        Ok(pvrp_greedy(inst, &capacities))
    }
}

fn pvrp_exact(inst: &PvrpInstance, capacities: &[f64]) -> f64 {
    fn walk(inst: &PvrpInstance, caps: &[f64], i: usize, loads: &mut Vec<f64>, best: &mut f64) {
        if i == inst.customers.len() {
            *best = best.min(peak_ratio(loads, caps));
            return;
        }
        let c = &inst.customers[i];
        for s in &c.schedules {
            for (d, bit) in s.iter().enumerate() {
                loads[d] += c.demand * *bit as f64;
            }
            walk(inst, caps, i + 1, loads, best);
            for (d, bit) in s.iter().enumerate() {
                loads[d] -= c.demand * *bit as f64;
            }
        }
    }
    let mut best = f64::INFINITY;
    walk(inst, capacities, 0, &mut vec![0.0; inst.period_length], &mut best);
    best
}

fn pvrp_greedy(inst: &PvrpInstance, capacities: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..inst.customers.len()).collect();
    order.sort_by(|a, b| inst.customers[*b].demand.total_cmp(&inst.customers[*a].demand));
    let mut loads = vec![0.0; inst.period_length];
    for i in order {
        let c = &inst.customers[i];
        let mut best: Option<(f64, &Vec<u8>)> = None;
        for s in &c.schedules {
            let trial: Vec<f64> = loads
                .iter()
                .zip(s)
                .map(|(l, bit)| l + c.demand * *bit as f64)
                .collect();
            let peak = peak_ratio(&trial, capacities);
            if best.is_none_or(|(b, _)| peak < b) {
                best = Some((peak, s));
            }
        }
        let (_, s) = best.expect("customers have at least one schedule");
        for (l, bit) in loads.iter_mut().zip(s) {
            *l += c.demand * *bit as f64;
        }
    }
    peak_ratio(&loads, capacities)
}

/// Assigns each value an ordinal bin 0, 1 or 2.
///
/// Thresholds are the nearest-rank values at ranks ceil(n/3) and ceil(2n/3)
/// of the sorted values; a value equal to a threshold goes to the lower bin.
pub fn tercile_bins(values: &[f64]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let t1 = sorted[n.div_ceil(3) - 1];
    let t2 = sorted[(2 * n).div_ceil(3) - 1];
    values
        .iter()
        .map(|v| {
            if *v <= t1 {
                0
            } else if *v <= t2 {
                1
            } else {
                2
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Plane, PvrpCustomer};
    use proptest::prelude::*;

    fn aircraft(p: usize, r: usize, sep: f64, width: f64) -> AircraftLandingInstance {
        AircraftLandingInstance {
            num_planes: p,
            num_runways: r,
            planes: (0..p)
                .map(|_| Plane {
                    earliest: 0.0,
                    target: 0.0,
                    latest: width,
                    penalty_early: 1.0,
                    penalty_late: 1.0,
                })
                .collect(),
            separation: (0..p)
                .map(|i| (0..p).map(|j| if i == j { 0.0 } else { sep }).collect())
                .collect(),
        }
    }

    #[test]
    fn aircraft_reference_value() {
        assert_eq!(difficulty_aircraft(&aircraft(10, 2, 4.0, 20.0)), Ok(1.0));
        assert_eq!(difficulty_aircraft(&aircraft(3, 3, 0.0, 5.0)), Ok(0.0));
        assert_eq!(
            difficulty_aircraft(&aircraft(3, 1, 2.0, 0.0)),
            Err(DifficultyError::DegenerateWindows)
        );
    }

    #[test]
    fn pvrp_single_customer() {
        let inst = PvrpInstance {
            depot: [0.0, 0.0],
            customers: vec![PvrpCustomer {
                coords: [1.0, 1.0],
                demand: 5.0,
                schedules: vec![vec![1]],
            }],
            period_length: 1,
            vehicles_per_day: vec![1],
            vehicle_capacity: 10.0,
        };
        assert_eq!(difficulty_pvrp(&inst), Ok(0.5));
        let broken = PvrpInstance {
            vehicles_per_day: vec![0],
            ..inst
        };
        assert_eq!(difficulty_pvrp(&broken), Err(DifficultyError::ZeroCapacityDay { day: 1 }));
    }

    #[test]
    fn terciles_of_29() {
        let values: Vec<f64> = (0..29).map(|i| ((i * 7) % 29) as f64).collect();
        let bins = tercile_bins(&values);
        let sizes: Vec<usize> = (0..3).map(|b| bins.iter().filter(|x| **x == b).count()).collect();
        assert_eq!(sizes, vec![10, 10, 9]);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.9), 9.0);
        assert_eq!(nearest_rank(&[3.0], 0.9), 3.0);
    }

    proptest! {
        #[test]
        fn bins_partition_distinct_values(n in 1usize..80, seed in 0u64..1000) {
            // distinct values in a scrambled order
            let values: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 100_003) as f64 + i as f64 * 1e-3).collect();
            let bins = tercile_bins(&values);
            prop_assert_eq!(bins.len(), n);
            let sizes: Vec<usize> = (0..3).map(|b| bins.iter().filter(|x| **x == b).count()).collect();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1, "{:?}", sizes);
            for i in 0..n {
                for j in 0..n {
                    if values[i] < values[j] {
                        prop_assert!(bins[i] <= bins[j]);
                    }
                }
            }
        }
    }
}
