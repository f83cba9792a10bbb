use std::collections::BTreeMap;

use super::{odometer, Verdict};
use crate::problem::{
    AircraftLandingInstance, AircraftSolution, CandidateSolution, Landing, SizeBounds,
};

fn integral(x: f64) -> Option<i64> {
    (x.fract() == 0.0 && x.abs() < 1e12).then_some(x as i64)
}

/// Integer landing times in `[earliest - 1, latest + 1]` on runways `1..=R+1`.
///
/// With integral data an optimal schedule with integral times exists, so the
/// best feasible candidate is the true optimum; the out-of-window times and
/// the extra runway put infeasible candidates into the space.
pub(super) fn enumerate(
    inst: &AircraftLandingInstance,
    visit: &mut dyn FnMut(&CandidateSolution, Verdict),
) -> Result<u64, String> {
    if inst.num_planes > SizeBounds::AIRCRAFT_PLANES || inst.num_runways > SizeBounds::AIRCRAFT_RUNWAYS {
        return Err(format!(
            "{} planes on {} runways exceeds {} planes on {} runways",
            inst.num_planes,
            inst.num_runways,
            SizeBounds::AIRCRAFT_PLANES,
            SizeBounds::AIRCRAFT_RUNWAYS
        ));
    }
    let mut windows = Vec::new();
    let mut targets = Vec::new();
    for (i, p) in inst.planes.iter().enumerate() {
        let (Some(e), Some(t), Some(l)) = (integral(p.earliest), integral(p.target), integral(p.latest)) else {
            return Err(format!("plane {} has non-integral times", i + 1));
        };
        if (l - e) as f64 > SizeBounds::AIRCRAFT_WINDOW {
            return Err(format!("plane {} has a window wider than {}", i + 1, SizeBounds::AIRCRAFT_WINDOW));
        }
        windows.push((e, l));
        targets.push(t);
    }
    let mut sep = vec![vec![0i64; inst.num_planes]; inst.num_planes];
    for (i, row) in inst.separation.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            sep[i][j] = integral(*s).ok_or_else(|| "separation must be integral".to_string())?;
        }
    }

    let runways = inst.num_runways as i64 + 1;
    let options: Vec<Vec<(i64, i64)>> = windows
        .iter()
        .map(|(e, l)| {
            (e - 1..=l + 1)
                .flat_map(|t| (1..=runways).map(move |r| (t, r)))
                .collect()
        })
        .collect();
    let radix: Vec<usize> = options.iter().map(Vec::len).collect();
    let mut visited = 0;
    odometer(&radix, |digits| {
        let choice: Vec<(i64, i64)> = digits.iter().enumerate().map(|(i, d)| options[i][*d]).collect();
        let verdict = judge(inst, &windows, &targets, &sep, &choice);
        let schedule: BTreeMap<i64, Landing> = choice
            .iter()
            .enumerate()
            .map(|(i, (t, r))| {
                (
                    i as i64 + 1,
                    Landing {
                        landing_time: *t as f64,
                        runway: *r as f64,
                    },
                )
            })
            .collect();
        visit(&CandidateSolution::AircraftLanding(AircraftSolution { schedule }), verdict);
        visited += 1;
    });
    Ok(visited)
}

fn judge(
    inst: &AircraftLandingInstance,
    windows: &[(i64, i64)],
    targets: &[i64],
    sep: &[Vec<i64>],
    choice: &[(i64, i64)],
) -> Verdict {
    for (i, (t, r)) in choice.iter().enumerate() {
        if *t < windows[i].0 || *t > windows[i].1 || *r > inst.num_runways as i64 {
            return None;
        }
    }
    for (i, (ti, ri)) in choice.iter().enumerate() {
        for (j, (tj, rj)) in choice.iter().enumerate() {
            if i != j && ri == rj && ti <= tj && tj - ti < sep[i][j] {
                return None;
            }
        }
    }
    let mut cost = 0.0;
    for (i, (t, _)) in choice.iter().enumerate() {
        let p = &inst.planes[i];
        let dev = t - targets[i];
        cost += if dev < 0 {
            p.penalty_early * (-dev) as f64
        } else {
            p.penalty_late * dev as f64
        };
    }
    Some(cost)
}
