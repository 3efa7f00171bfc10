//! Element-wise block coordinate descent on the coefficient path: every site
//! extracts its coefficients with fresh inversions and decompositions.

use crate::cm_solvers::prop2::select_by_coeffs;
use crate::cm_solvers::{closed, sweep_solver, unit_column, CmProblem};
use crate::derivatives::PhaseMat;
use crate::error::{Error, Result};
use crate::numkernel::cis;
use crate::report::SolverReport;

/// Same sweep order and stopping rule as the alternating solver, with the
/// per-site phase taken from the closed forms.
pub fn bcd_elementwise(problem: &CmProblem, init: &PhaseMat, eps: f64, max_iter: usize) -> Result<SolverReport> {
    let tag = problem.tag();
    let sigma = tag.sigma();
    let sense = tag.sense();
    sweep_solver(problem, init, eps, max_iter, |x| {
        // IRS problems keep the whitened channel current with rank-one updates
        let irs = match problem {
            CmProblem::IrsCapacity(s) | CmProblem::IrsMse(s) => Some(s),
            _ => None,
        };
        let mut htil = irs.map(|s| s.whitened(&unit_column(x)));
        let mut degenerate = 0;
        for site in x.sites() {
            let found = closed::closed_site(problem, x, site, htil.as_ref());
            let (coeffs, (t1, t2)) = match found {
                Ok(v) => v,
                Err(Error::Degenerate(_)) => {
                    degenerate += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (t, flat) = select_by_coeffs(coeffs.a, coeffs.b, sigma, t1, t2, sense);
            if flat {
                degenerate += 1;
                continue;
            }
            if let (Some(s), Some(h)) = (irs, htil.as_mut()) {
                let delta = cis(t) - x.entry(site.0, site.1);
                *h += s.w1.column(site.0) * s.h2.row(site.0) * delta;
            }
            x.set(site.0, site.1, t);
        }
        Ok(degenerate)
    })
}
