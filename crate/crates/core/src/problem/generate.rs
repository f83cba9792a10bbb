//! Deterministic synthetic instance generators.
//!
//! Every generator first builds a feasible witness and then derives the
//! instance data around it, so each generated instance admits at least one
//! feasible solution. Small-class instances use integral data and tight
//! bounds so the brute-force oracles stay exact and fast.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Size limits of the small class, shared with the brute-force oracles.
#[derive(Debug, Clone, Copy)]
pub struct SizeBounds;

impl SizeBounds {
    pub const AIRCRAFT_PLANES: usize = 4;
    pub const AIRCRAFT_RUNWAYS: usize = 2;
    pub const AIRCRAFT_WINDOW: f64 = 3.0;
    pub const PVRP_CUSTOMERS: usize = 4;
    pub const PVRP_PERIOD: usize = 2;
    pub const PVRP_SCHEDULES: usize = 2;
    pub const CONTAINER_DIM: u32 = 3;
    pub const CONTAINER_BOXES: u32 = 2;
    pub const WEIGHT_FLOOR_DIM: u32 = 2;
    pub const WEIGHT_HEIGHT: u32 = 3;
    pub const WEIGHT_BOXES: u32 = 3;
    pub const RCSP_VERTICES: usize = 8;
    pub const RCSP_RESOURCES: usize = 2;
    pub const CREW_TASKS: usize = 6;
    pub const STEINER_TERMINALS: usize = 6;
}

fn rng_for(domain: DomainId, size: SizeClass, seed: u64) -> ChaCha8Rng {
    let d = DomainId::ALL.iter().position(|x| *x == domain).unwrap() as u64;
    let s = match size {
        SizeClass::Small => 1u64,
        SizeClass::Medium => 2,
        SizeClass::Large => 3,
    };
    // splitmix64 finalizer over the packed key
    let mut z = seed ^ (d << 56) ^ (s << 48) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Generates one instance; identical arguments always give identical output.
pub fn generate_instance(domain: DomainId, size: SizeClass, seed: u64) -> ProblemInstance {
    let mut rng = rng_for(domain, size, seed);
    let payload = match domain {
        DomainId::AircraftLanding => Payload::AircraftLanding(aircraft(&mut rng, size)),
        DomainId::PeriodicVehicleRouting => Payload::PeriodicVehicleRouting(pvrp(&mut rng, size)),
        DomainId::ContainerLoading => Payload::ContainerLoading(container(&mut rng, size, false)),
        DomainId::ContainerLoadingWeight => {
            Payload::ContainerLoadingWeight(container(&mut rng, size, true))
        }
        DomainId::Rcsp => Payload::Rcsp(rcsp(&mut rng, size)),
        DomainId::CrewScheduling => Payload::CrewScheduling(crew(&mut rng, size)),
        DomainId::EuclideanSteiner => Payload::EuclideanSteiner(steiner(&mut rng, size)),
    };
    debug_assert!(payload.validate().is_ok(), "generator broke an invariant");
    ProblemInstance {
        instance_id: format!("{domain}-{size}-{seed}"),
        payload,
        reference_objective: None,
    }
}

/// `count` instances with seeds `base_seed, base_seed + 1, ...`.
pub fn generate_dataset(
    domain: DomainId,
    size: SizeClass,
    base_seed: u64,
    count: usize,
    split: Split,
) -> Dataset {
    Dataset {
        domain,
        split,
        instances: (0..count as u64)
            .map(|i| generate_instance(domain, size, base_seed.wrapping_add(i)))
            .collect(),
    }
}

fn pick<R: Rng>(rng: &mut R, size: SizeClass, small: (i64, i64), medium: (i64, i64), large: (i64, i64)) -> i64 {
    let (lo, hi) = match size {
        SizeClass::Small => small,
        SizeClass::Medium => medium,
        SizeClass::Large => large,
    };
    rng.gen_range(lo..=hi)
}

fn aircraft<R: Rng>(rng: &mut R, size: SizeClass) -> AircraftLandingInstance {
    let p = pick(rng, size, (1, SizeBounds::AIRCRAFT_PLANES as i64), (10, 20), (30, 50)) as usize;
    let r = pick(rng, size, (1, SizeBounds::AIRCRAFT_RUNWAYS as i64), (1, 3), (2, 4)) as usize;
    let (sep_hi, half_window) = match size {
        SizeClass::Small => (3, 0),
        SizeClass::Medium => (8, 15),
        SizeClass::Large => (10, 40),
    };
    let mut separation = vec![vec![0.0; p]; p];
    for (i, row) in separation.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            if i != j {
                *s = rng.gen_range(1..=sep_hi) as f64;
            }
        }
    }
    // witness: random runway per plane, landing in a random order per runway
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut witness = vec![0.0; p];
    let mut placed: Vec<Vec<usize>> = vec![Vec::new(); r];
    for &plane in &order {
        let runway = rng.gen_range(0..r);
        let earliest_ok = placed[runway]
            .iter()
            .map(|&q| witness[q] + separation[q][plane])
            .fold(rng.gen_range(0..=5) as f64, f64::max);
        witness[plane] = earliest_ok + rng.gen_range(0..=1) as f64;
        placed[runway].push(plane);
    }
    let planes = witness
        .iter()
        .map(|&w| {
            let (before, after) = if size == SizeClass::Small {
                let width = rng.gen_range(0..=SizeBounds::AIRCRAFT_WINDOW as i64);
                let before = rng.gen_range(0..=width);
                (before as f64, (width - before) as f64)
            } else {
                (
                    rng.gen_range(0..=half_window) as f64,
                    rng.gen_range(1..=2 * half_window) as f64,
                )
            };
            let earliest = (w - before).max(0.0);
            let latest = w + after;
            let target = rng.gen_range(earliest as i64..=latest as i64) as f64;
            Plane {
                earliest,
                target,
                latest,
                penalty_early: rng.gen_range(1..=5) as f64,
                penalty_late: rng.gen_range(1..=5) as f64,
            }
        })
        .collect();
    AircraftLandingInstance {
        num_planes: p,
        num_runways: r,
        planes,
        separation,
    }
}

fn pvrp<R: Rng>(rng: &mut R, size: SizeClass) -> PvrpInstance {
    let n = pick(rng, size, (1, SizeBounds::PVRP_CUSTOMERS as i64), (8, 15), (25, 40)) as usize;
    let period = pick(rng, size, (1, SizeBounds::PVRP_PERIOD as i64), (3, 5), (5, 7)) as usize;
    let max_sched = match size {
        SizeClass::Small => SizeBounds::PVRP_SCHEDULES,
        _ => 3,
    };
    let extent = match size {
        SizeClass::Small => 10,
        _ => 100,
    };
    let mut customers = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(1..=max_sched);
        let mut schedules: Vec<Vec<u8>> = Vec::new();
        for _ in 0..k {
            let mut s: Vec<u8> = (0..period).map(|_| rng.gen_range(0..=1)).collect();
            if s.iter().all(|b| *b == 0) {
                let d = rng.gen_range(0..period);
                s[d] = 1;
            }
            if !schedules.contains(&s) {
                schedules.push(s);
            }
        }
        customers.push(PvrpCustomer {
            coords: [
                rng.gen_range(0..=extent) as f64,
                rng.gen_range(0..=extent) as f64,
            ],
            demand: rng.gen_range(1..=5) as f64,
            schedules,
        });
    }
    let max_demand = customers.iter().map(|c| c.demand).fold(1.0, f64::max);
    let vehicle_capacity = (max_demand + rng.gen_range(0..=max_demand as i64) as f64).max(1.0);
    // witness: first schedule per customer, first-fit tours per day
    let mut vehicles_per_day = Vec::with_capacity(period);
    for d in 0..period {
        let mut loads: Vec<f64> = Vec::new();
        for c in customers.iter().filter(|c| c.schedules[0][d] == 1) {
            match loads.iter_mut().find(|l| **l + c.demand <= vehicle_capacity) {
                Some(l) => *l += c.demand,
                None => loads.push(c.demand),
            }
        }
        let needed = loads.len().max(1) as u32;
        vehicles_per_day.push(needed + rng.gen_range(0..=1));
    }
    PvrpInstance {
        depot: [
            rng.gen_range(0..=extent) as f64,
            rng.gen_range(0..=extent) as f64,
        ],
        customers,
        period_length: period,
        vehicles_per_day,
        vehicle_capacity,
    }
}

fn container<R: Rng>(rng: &mut R, size: SizeClass, weighted: bool) -> ContainerInstance {
    let (container, types, box_hi, total_boxes) = match (size, weighted) {
        (SizeClass::Small, false) => {
            let c = SizeBounds::CONTAINER_DIM;
            (
                [rng.gen_range(1..=c), rng.gen_range(1..=c), rng.gen_range(1..=c)],
                rng.gen_range(1..=2usize),
                2u32,
                SizeBounds::CONTAINER_BOXES,
            )
        }
        (SizeClass::Small, true) => {
            let f = SizeBounds::WEIGHT_FLOOR_DIM;
            (
                [
                    rng.gen_range(1..=f),
                    rng.gen_range(1..=f),
                    rng.gen_range(1..=SizeBounds::WEIGHT_HEIGHT),
                ],
                rng.gen_range(1..=2usize),
                2u32,
                SizeBounds::WEIGHT_BOXES,
            )
        }
        (SizeClass::Medium, _) => (
            [rng.gen_range(10..=20), rng.gen_range(10..=20), rng.gen_range(10..=20)],
            rng.gen_range(3..=5usize),
            8u32,
            60,
        ),
        (SizeClass::Large, _) => (
            [rng.gen_range(20..=40), rng.gen_range(20..=40), rng.gen_range(20..=40)],
            rng.gen_range(5..=8usize),
            12u32,
            200,
        ),
    };
    let mut remaining = total_boxes;
    let mut box_types = Vec::with_capacity(types);
    for t in 0..types {
        if remaining == 0 {
            break;
        }
        let mut dims = [0u32; 3];
        let mut flags = [0u8; 3];
        if t == 0 {
            // witness: fits upright (vertical = third side) at the origin
            for (i, d) in dims.iter_mut().enumerate() {
                *d = rng.gen_range(1..=box_hi.min(container[i]));
            }
            flags[2] = 1;
            for f in flags.iter_mut().take(2) {
                *f = rng.gen_range(0..=1);
            }
        } else {
            for d in dims.iter_mut() {
                *d = rng.gen_range(1..=box_hi);
            }
            for f in flags.iter_mut() {
                *f = rng.gen_range(0..=1);
            }
            if flags.iter().all(|f| *f == 0) {
                flags[rng.gen_range(0..3)] = 1;
            }
        }
        let share = if t + 1 == types { remaining } else { remaining.min(remaining / 2 + 1) };
        let count = rng.gen_range(1..=share.max(1));
        remaining -= count;
        let (weight, lbs) = if weighted {
            let w = rng.gen_range(1..=5) as f64;
            let hi = if size == SizeClass::Small { 10 } else { 200 };
            (
                Some(w),
                [
                    Some(rng.gen_range(0..=hi) as f64),
                    Some(rng.gen_range(0..=hi) as f64),
                    Some(rng.gen_range(0..=hi) as f64),
                ],
            )
        } else {
            (None, [None, None, None])
        };
        box_types.push(BoxType {
            dims,
            flags,
            count,
            weight,
            lb1: lbs[0],
            lb2: lbs[1],
            lb3: lbs[2],
        });
    }
    ContainerInstance { container, box_types }
}

fn rcsp<R: Rng>(rng: &mut R, size: SizeClass) -> RcspInstance {
    let n = pick(rng, size, (3, SizeBounds::RCSP_VERTICES as i64), (15, 30), (50, 100)) as usize;
    let k = pick(rng, size, (1, SizeBounds::RCSP_RESOURCES as i64), (1, 3), (2, 4)) as usize;
    let density = match size {
        SizeClass::Small => 0.45,
        SizeClass::Medium => 0.2,
        SizeClass::Large => 0.08,
    };
    // witness path: increasing sequence from 1 to n
    let mut witness = vec![1u32];
    for v in 2..n as u32 {
        if rng.gen_bool(0.4) {
            witness.push(v);
        }
    }
    witness.push(n as u32);
    let vertex_resources: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(0..=2) as f64).collect())
        .collect();
    let mut graph: BTreeMap<u32, Vec<RcspArc>> = BTreeMap::new();
    let mut m = 0;
    for from in 1..n as u32 {
        for to in from + 1..=n as u32 {
            let on_witness = witness.windows(2).any(|w| w[0] == from && w[1] == to);
            if on_witness || rng.gen_bool(density) {
                graph.entry(from).or_default().push(RcspArc {
                    end: to,
                    cost: rng.gen_range(1..=10) as f64,
                    resources: (0..k).map(|_| rng.gen_range(0..=3) as f64).collect(),
                });
                m += 1;
            }
        }
    }
    let mut used = vec![0.0; k];
    for v in &witness {
        for (u, r) in used.iter_mut().zip(&vertex_resources[*v as usize - 1]) {
            *u += r;
        }
    }
    for w in witness.windows(2) {
        let arc = graph[&w[0]].iter().find(|a| a.end == w[1]).unwrap();
        for (u, r) in used.iter_mut().zip(&arc.resources) {
            *u += r;
        }
    }
    let lower_bounds = used
        .iter()
        .map(|u| (u - rng.gen_range(0..=3) as f64).max(0.0))
        .collect();
    let upper_bounds = used.iter().map(|u| u + rng.gen_range(0..=3) as f64).collect();
    RcspInstance {
        n,
        m,
        k,
        lower_bounds,
        upper_bounds,
        vertex_resources,
        graph,
    }
}

fn crew<R: Rng>(rng: &mut R, size: SizeClass) -> CrewInstance {
    let n = pick(rng, size, (1, SizeBounds::CREW_TASKS as i64), (15, 30), (50, 90)) as usize;
    let chains = match size {
        SizeClass::Small => rng.gen_range(1..=n.min(3)),
        SizeClass::Medium => rng.gen_range(3..=6),
        SizeClass::Large => rng.gen_range(6..=12),
    };
    let mut ids: Vec<u32> = (1..=n as u32).collect();
    ids.shuffle(rng);
    let mut chain_of: Vec<Vec<u32>> = vec![Vec::new(); chains];
    for (i, id) in ids.iter().enumerate() {
        let c = if i < chains { i } else { rng.gen_range(0..chains) };
        chain_of[c].push(*id);
    }
    let mut tasks = BTreeMap::new();
    let mut arcs = Vec::new();
    let mut max_duty: f64 = 0.0;
    for chain in &chain_of {
        let mut cursor = rng.gen_range(0..=10) as f64;
        let start = cursor;
        for (pos, id) in chain.iter().enumerate() {
            let duration = rng.gen_range(1..=5) as f64;
            tasks.insert(*id, (cursor, cursor + duration));
            cursor += duration;
            if pos + 1 < chain.len() {
                cursor += rng.gen_range(0..=3) as f64;
                arcs.push(CrewArc {
                    from: *id,
                    to: chain[pos + 1],
                    cost: rng.gen_range(1..=10) as f64,
                });
            }
        }
        max_duty = max_duty.max(cursor - start);
    }
    let extra_p = if size == SizeClass::Small { 0.3 } else { 0.05 };
    for a in 1..=n as u32 {
        for b in 1..=n as u32 {
            if a != b
                && !arcs.iter().any(|x: &CrewArc| x.from == a && x.to == b)
                && rng.gen_bool(extra_p)
            {
                arcs.push(CrewArc {
                    from: a,
                    to: b,
                    cost: rng.gen_range(1..=10) as f64,
                });
            }
        }
    }
    arcs.sort_by_key(|a| (a.from, a.to));
    CrewInstance {
        n,
        k: chains + rng.gen_range(0..=1),
        time_limit: max_duty.max(1.0) + rng.gen_range(0..=5) as f64,
        tasks,
        arcs,
    }
}

fn steiner<R: Rng>(rng: &mut R, size: SizeClass) -> SteinerInstance {
    let count = pick(
        rng,
        size,
        (2, SizeBounds::STEINER_TERMINALS as i64),
        (10, 20),
        (30, 60),
    ) as usize;
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(count);
    while points.len() < count {
        let p = if size == SizeClass::Small {
            [rng.gen_range(0..=10) as f64, rng.gen_range(0..=10) as f64]
        } else {
            [
                (rng.gen_range(0.0..100.0f64) * 1000.0).round() / 1000.0,
                (rng.gen_range(0.0..100.0f64) * 1000.0).round() / 1000.0,
            ]
        };
        if !points
            .iter()
            .any(|q| (q[0] - p[0]).abs() <= 1e-12 && (q[1] - p[1]).abs() <= 1e-12)
        {
            points.push(p);
        }
    }
    SteinerInstance { points }
}
