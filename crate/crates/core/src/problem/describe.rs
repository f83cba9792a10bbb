use super::DomainId;

/// Natural-language problem statement handed to the generation operators.
///
/// Each text states the objective, the constraints, the keyword arguments
/// `solve` receives and the exact shape of each yielded solution.
pub fn task_description(domain: DomainId) -> &'static str {
    match domain {
        DomainId::AircraftLanding => AIRCRAFT,
        DomainId::PeriodicVehicleRouting => PVRP,
        DomainId::ContainerLoading => CONTAINER,
        DomainId::ContainerLoadingWeight => CONTAINER_WEIGHT,
        DomainId::Rcsp => RCSP,
        DomainId::CrewScheduling => CREW,
        DomainId::EuclideanSteiner => STEINER,
    }
}

const AIRCRAFT: &str = "\
Aircraft landing scheduling. Assign every plane a landing time and a runway.

Input keyword arguments:
- num_planes (int), num_runways (int)
- planes: list of dicts with keys earliest, target, latest, penalty_early, penalty_late; plane ids are 1-based list positions
- separation: num_planes x num_planes matrix; separation[i][j] is the minimum gap required when plane i+1 lands before plane j+1 on the same runway

Constraints:
- each landing time lies within [earliest, latest] of its plane
- runway is an integer in 1..num_runways
- for two planes on the same runway where plane i lands no later than plane j, time_j - time_i >= separation[i][j]

Objective (minimize): sum over planes of penalty_early * max(0, target - t) + penalty_late * max(0, t - target).

Yield: {\"schedule\": {plane_id: {\"landing_time\": float, \"runway\": int}}} with one entry per plane.
";

const PVRP: &str = "\
Periodic vehicle routing. Over a planning period, choose one visit schedule per customer and build depot-based tours for every day.

Input keyword arguments:
- depot: [x, y] (vertex id 0)
- customers: list of dicts with coords [x, y], demand, schedules (list of 0/1 vectors of length period_length); customer ids are 1-based list positions
- period_length (int), vehicles_per_day (list of int, one per day), vehicle_capacity (float)

Constraints:
- each customer's selected schedule is one of its candidate schedules
- on day d, exactly the customers whose selected schedule has a 1 at position d are visited, each exactly once
- every tour starts and ends at 0, never passes through 0 in between and repeats no customer
- the demand served by one tour is at most vehicle_capacity
- the number of tours on day d is at most vehicles_per_day[d-1]

Objective (minimize): total Euclidean length of all tours over all days.

Yield: {\"selected_schedules\": {customer_id: [0/1, ...]}, \"tours\": {day: [[0, c1, c2, ..., 0], ...]}} with days numbered from 1.
";

const CONTAINER: &str = "\
Three-dimensional container loading. Place axis-aligned boxes into a single container to maximize the loaded volume.

Input keyword arguments:
- container: [length, width, height] (integers)
- box_types: list of dicts with dims [d0, d1, d2], flags [f0, f1, f2] and count; box type ids are 1-based list positions

A placement is seven integers [box_type, container_id, x, y, z, v, hswap]:
- container_id is always 1
- (x, y, z) is the corner with the smallest coordinates
- v in {0, 1, 2} picks dims[v] as the vertical side; it is allowed only when flags[v] == 1
- the two remaining dims, in their original order, give the extent along x and y; hswap = 1 swaps them

Constraints: every box lies fully inside the container, boxes do not share interior volume (touching faces is fine), and each type is used at most count times.

Objective (maximize): total placed box volume divided by the container volume.

Yield: {\"placements\": [[box_type, 1, x, y, z, v, hswap], ...]}.
";

const CONTAINER_WEIGHT: &str = "\
Three-dimensional container loading with weights and stacking limits. Place boxes into one container to maximize the loaded volume.

Input keyword arguments:
- container: [L, W, H] (integers)
- box_types: list of dicts with dims [d1, d2, d3], flags [f1, f2, f3], count, weight, lb1, lb2, lb3; box type ids are 1-based list positions

A placement is {\"box_type\", \"orientation\", \"x\", \"y\", \"z\"}:
- orientation o in {1, 2, 3} makes d_o the vertical side; it is allowed only when flag f_o is 1
- the other two dims, in their original order, give the extent along x and y
- (x, y, z) is the corner with the smallest coordinates

Constraints:
- boxes lie fully inside the container, do not overlap and respect per-type counts
- a box with z > 0 rests exactly on the top face of one single other box whose top face contains the whole footprint
- for each box, the total weight resting on it directly or indirectly is at most its limit lb_o for the orientation it was placed in

Objective (maximize): total placed box volume divided by the container volume.

Yield: {\"placements\": [{\"box_type\": int, \"orientation\": int, \"x\": int, \"y\": int, \"z\": int}, ...]}.
";

const RCSP: &str = "\
Resource constrained shortest path. Find a cheap directed path from vertex 1 to vertex n whose accumulated resources stay within bounds.

Input keyword arguments:
- n (vertices, numbered 1..n), m (arc count), K (resource count)
- lower_bounds, upper_bounds: lists of length K
- vertex_resources: n x K matrix; row i-1 belongs to vertex i
- graph: dict from vertex to a list of arcs [end_vertex, cost, [r_1, ..., r_K]]

Constraints:
- the path starts at 1 and ends at n
- every consecutive pair of the path is an arc listed in graph
- for each resource k, the sum over visited vertices of vertex_resources plus the sum over used arcs of arc resources lies in [lower_bounds[k], upper_bounds[k]]

Objective (minimize): sum of the costs of the used arcs. The grader recomputes it from the path.

Yield: {\"path\": [1, ..., n]}.
";

const CREW: &str = "\
Crew scheduling. Partition timed tasks into ordered duties, one per crew, using few and cheap transitions.

Input keyword arguments:
- N (tasks, ids 1..N), K (maximum number of crews), time_limit (maximum duty length)
- tasks: dict from task id to [start_time, finish_time]
- arcs: list of [from_task, to_task, cost]; only listed transitions may follow each other within a duty

Constraints:
- every task appears in exactly one crew and no crew is empty
- at most K crews are used
- within a crew, each task finishes no later than the next one starts and the pair is a listed arc
- the duty length of a crew, last finish minus first start, is at most time_limit

Objective (minimize): sum of transition costs over consecutive task pairs of all crews.

Yield: {\"crews\": [[task_id, ...], ...]}.
";

const STEINER: &str = "\
Euclidean Steiner tree. Add extra points in the plane so that the minimum spanning tree over the terminals plus the added points becomes as short as possible.

Input keyword arguments:
- points: list of [x, y] terminal coordinates

The grader computes the Euclidean minimum spanning tree length over the terminals alone (base) and over terminals plus your points (candidate). The solution is valid only if candidate <= base. Score (maximize): 1 - candidate / base.

Yield: {\"steiner_points\": [[x, y], ...]} (an empty list is valid and scores 0).
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_domain_has_a_description_naming_its_output_key() {
        let keys = [
            "schedule",
            "selected_schedules",
            "placements",
            "orientation",
            "path",
            "crews",
            "steiner_points",
        ];
        for (d, key) in DomainId::ALL.into_iter().zip(keys) {
            assert!(task_description(d).contains(key), "{d}");
        }
    }
}
