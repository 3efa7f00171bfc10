//! Cyclic exhaustive search over each site's phase.

use std::f64::consts::TAU;
use std::time::Instant;

use crate::cm_solvers::CmProblem;
use crate::derivatives::PhaseMat;
use crate::error::{Error, Result};
use crate::report::{Solution, SolverReport};

pub const DEFAULT_RESOLUTION: usize = 4096;
pub const DEFAULT_SWEEPS: usize = 5;
/// Desk-scale guard on the number of sites.
pub const MAX_SITES: usize = 8;

/// Each site scanned over `resolution` uniform phases, the best kept; a site
/// only moves on strict improvement so the objective never degrades. Stops
/// early once a whole sweep moves nothing, since later sweeps would repeat it.
pub fn grid_search_oracle(
    problem: &CmProblem,
    init: &PhaseMat,
    resolution: usize,
    sweeps: usize,
) -> Result<SolverReport> {
    let n = problem.sites();
    if n > MAX_SITES {
        return Err(Error::SizeGuard { sites: n, limit: MAX_SITES });
    }
    if resolution == 0 || sweeps == 0 {
        return Err(Error::InvalidInput("resolution and sweeps must be positive".into()));
    }
    let start = Instant::now();
    let sense = problem.sense();
    let mut x = init.clone();
    let mut best = problem.objective(&x)?;
    let mut trajectory = vec![best];
    let mut done = 0;
    let mut settled = false;
    for _ in 0..sweeps {
        done += 1;
        let mut moved = false;
        for (i, j) in x.sites() {
            let mut pick = x.get(i, j);
            for k in 0..resolution {
                let t = TAU * k as f64 / resolution as f64;
                let f = problem.objective(&x.with(i, j, t))?;
                if sense.better(f, best) {
                    best = f;
                    pick = t;
                    moved = true;
                }
            }
            x.set(i, j, pick);
        }
        trajectory.push(best);
        if !moved {
            settled = true;
            break;
        }
    }
    let mut rep = SolverReport::new(Solution::Phase(x), best);
    rep.trajectory = trajectory;
    rep.iterations = done;
    rep.converged = settled;
    rep.seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}
