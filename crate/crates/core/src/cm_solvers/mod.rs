//! Constant-modulus solvers: element-wise phase kernels, closed-form per-site
//! phases, five-probe coefficient recovery and the alternating sweep driver.

pub(crate) mod closed;
mod fast;
pub mod prop2;
mod scenarios;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use closed::{
    closed_coeffs, closed_phase, closed_phase_hybrid_capacity, closed_phase_hybrid_mse, closed_phase_irs_capacity,
    closed_phase_irs_mse, closed_phase_irs_wmmse, closed_phase_wmmse, hybrid_scratch, irs_scratch, HybridScratch,
    IrsScratch, ScratchIntermediates,
};
pub use prop2::{prop2_phase, prop2_recover, ProbeSet};
pub use scenarios::{HybridScenario, PassiveIrsScenario, WmmseQuadScenario};

use crate::derivatives::{wrap_phase, PhaseMat};
use crate::error::{Error, Result};
use crate::numkernel::{self, cis, CMat, C64};
use crate::par::Execution;
use crate::report::{rel_change_below, Flag, Sense, Solution, SolverReport};

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

/// `g = σ·Im{AX + BX* + C}/d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmCoeffs {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    /// Positive denominator at the current point; `1` where the closed form
    /// never needs it.
    pub d: f64,
}

/// Which objective a [`CmProblem`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemTag {
    HybridCapacity,
    HybridMse,
    Wmmse,
    IrsCapacity,
    IrsMse,
    IrsWmmse,
}

impl ProblemTag {
    pub fn name(self) -> &'static str {
        match self {
            ProblemTag::HybridCapacity => "hybrid_capacity",
            ProblemTag::HybridMse => "hybrid_mse",
            ProblemTag::Wmmse => "wmmse",
            ProblemTag::IrsCapacity => "irs_capacity",
            ProblemTag::IrsMse => "irs_mse",
            ProblemTag::IrsWmmse => "irs_wmmse",
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            ProblemTag::HybridCapacity | ProblemTag::IrsCapacity => Sense::Max,
            _ => Sense::Min,
        }
    }

    /// Real factor `σ` in `g = σ·Im{q}`.
    pub fn sigma(self) -> f64 {
        match self {
            ProblemTag::HybridMse | ProblemTag::IrsMse => 2.0,
            _ => -2.0,
        }
    }

    /// True for the linear forms, whose two candidates differ by exactly π.
    pub fn is_linear(self) -> bool {
        !matches!(self, ProblemTag::HybridMse | ProblemTag::IrsMse)
    }
}

/// A constant-modulus problem instance.
#[derive(Debug, Clone)]
pub enum CmProblem {
    /// `max log|I + X^HΠX|`.
    HybridCapacity(HybridScenario),
    /// `min Tr(I + X^HΠX)^{-1}`.
    HybridMse(HybridScenario),
    /// `min Tr(ΦXΠX^H) − 2Re Tr(B^HX)` over a full phase matrix.
    Wmmse(WmmseQuadScenario),
    /// `max log|I + Σ^{-1}HH^H|`, `H = H0 + H1ΛH2`.
    IrsCapacity(PassiveIrsScenario),
    /// `min Tr(I + Σ^{-1}HH^H)^{-1}`.
    IrsMse(PassiveIrsScenario),
    /// The quadratic model with a diagonal `Λ`.
    IrsWmmse(WmmseQuadScenario),
}

impl CmProblem {
    pub fn tag(&self) -> ProblemTag {
        match self {
            CmProblem::HybridCapacity(_) => ProblemTag::HybridCapacity,
            CmProblem::HybridMse(_) => ProblemTag::HybridMse,
            CmProblem::Wmmse(_) => ProblemTag::Wmmse,
            CmProblem::IrsCapacity(_) => ProblemTag::IrsCapacity,
            CmProblem::IrsMse(_) => ProblemTag::IrsMse,
            CmProblem::IrsWmmse(_) => ProblemTag::IrsWmmse,
        }
    }

    pub fn sense(&self) -> Sense {
        self.tag().sense()
    }

    /// Shape of the phase matrix; diagonal variables use a `K × 1` column.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            CmProblem::HybridCapacity(s) | CmProblem::HybridMse(s) => (s.n_t(), s.n_rf),
            CmProblem::Wmmse(s) => (s.rows(), s.cols()),
            CmProblem::IrsCapacity(s) | CmProblem::IrsMse(s) => (s.k(), 1),
            CmProblem::IrsWmmse(s) => (s.rows(), 1),
        }
    }

    pub fn sites(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    pub(crate) fn check(&self, x: &PhaseMat) -> Result<()> {
        if let CmProblem::IrsWmmse(s) = self {
            if !s.is_square() {
                return Err(Error::DimensionMismatch("diagonal model needs square Φ and Π".into()));
            }
        }
        let (r, c) = self.shape();
        if x.rows() != r || x.cols() != c {
            return Err(Error::DimensionMismatch(format!(
                "phase matrix {}x{}, problem expects {r}x{c}",
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn check_site(&self, x: &PhaseMat, site: (usize, usize)) -> Result<()> {
        self.check(x)?;
        if site.0 >= x.rows() || site.1 >= x.cols() {
            return Err(Error::InvalidInput(format!("site ({},{}) out of range", site.0, site.1)));
        }
        Ok(())
    }

    pub fn objective(&self, x: &PhaseMat) -> Result<f64> {
        self.check(x)?;
        match self {
            CmProblem::HybridCapacity(s) | CmProblem::HybridMse(s) => {
                let xm = x.x();
                let m = numkernel::hermitize(&(numkernel::identity(s.n_rf) + xm.adjoint() * s.pi_m.as_mat() * &xm))?;
                if matches!(self, CmProblem::HybridCapacity(_)) {
                    numkernel::logdet_hpd(&m)
                } else {
                    Ok(numkernel::trace_re(&numkernel::inv_hpd(m.as_mat())?))
                }
            }
            CmProblem::Wmmse(s) => Ok(quad_objective(s, &x.x())),
            CmProblem::IrsWmmse(s) => Ok(quad_objective(s, &x.diag_x())),
            CmProblem::IrsCapacity(s) | CmProblem::IrsMse(s) => {
                let h = s.whitened(&unit_column(x));
                let q = numkernel::hermitize(&(numkernel::identity(s.n_r()) + &h * h.adjoint()))?;
                if matches!(self, CmProblem::IrsCapacity(_)) {
                    numkernel::logdet_hpd(&q)
                } else {
                    Ok(numkernel::trace_re(&numkernel::inv_hpd(q.as_mat())?))
                }
            }
        }
    }

    /// Complex kernel `q` at one site from the dense matrix expressions;
    /// the phase derivative is `σ·Im q`.
    pub fn kernel(&self, x: &PhaseMat, site: (usize, usize)) -> Result<C64> {
        self.check_site(x, site)?;
        let (i, j) = site;
        match self {
            CmProblem::HybridCapacity(s) | CmProblem::HybridMse(s) => {
                let xm = x.x();
                let y = s.pi_m.as_mat() * &xm;
                let m = numkernel::identity(s.n_rf) + xm.adjoint() * &y;
                let mi = numkernel::inv_hpd(&m)?;
                let t = if matches!(self, CmProblem::HybridCapacity(_)) { y * mi } else { y * &mi * &mi };
                Ok(t[(i, j)].conj() * xm[(i, j)])
            }
            CmProblem::Wmmse(s) => {
                let xm = x.x();
                let z = s.phi.as_mat() * &xm * s.pi_m.as_mat();
                Ok((z[(i, j)] - s.b[(i, j)]).conj() * xm[(i, j)])
            }
            CmProblem::IrsWmmse(s) => {
                let lam = x.diag_x();
                let z = s.phi.as_mat() * &lam * s.pi_m.as_mat();
                Ok((z[(i, i)] - s.b[(i, i)]).conj() * lam[(i, i)])
            }
            CmProblem::IrsCapacity(s) | CmProblem::IrsMse(s) => {
                let lam = unit_column(x);
                let h = s.whitened(&lam);
                let h1 = s.w1.column(i).clone_owned();
                let h2 = s.h2.row(i).clone_owned();
                let m = &h - &h1 * &h2 * lam[i];
                let q = numkernel::identity(s.n_r()) + &h * h.adjoint();
                let qi = numkernel::inv_hpd(&q)?;
                let mh = &m * h2.adjoint();
                let z = if matches!(self, CmProblem::IrsCapacity(_)) { &qi * &h1 } else { &qi * &qi * &h1 };
                Ok(lam[i] * mh.dotc(&z))
            }
        }
    }

    /// `∂f/∂θ_{ij}`.
    pub fn g_eval(&self, x: &PhaseMat, site: (usize, usize)) -> Result<f64> {
        Ok(self.tag().sigma() * self.kernel(x, site)?.im)
    }

    /// Site kernel evaluator with cached intermediates for the sweep.
    pub(crate) fn evaluator<'a>(&'a self, x: &PhaseMat) -> Result<Box<dyn fast::SiteKernel + 'a>> {
        self.check(x)?;
        fast::build(self, x)
    }
}

/// `e^{jθ}` for each entry of a column layout.
pub(crate) fn unit_column(x: &PhaseMat) -> Vec<C64> {
    x.theta().iter().map(|&t| cis(t)).collect()
}

fn quad_objective(s: &WmmseQuadScenario, xm: &CMat) -> f64 {
    let quad = numkernel::trace_re(&(s.phi.as_mat() * xm * s.pi_m.as_mat() * xm.adjoint()));
    let lin: f64 = s.b.iter().zip(xm.iter()).map(|(b, x)| (b.conj() * x).re).sum();
    quad - 2.0 * lin
}

/// Candidate choice by the curvature of the dense `g` (two extra
/// evaluations, four when the first candidate is flat).
pub fn prop1_select(
    problem: &CmProblem,
    x: &PhaseMat,
    site: (usize, usize),
    theta1: f64,
    theta2: f64,
    sense: Sense,
) -> Result<(f64, bool)> {
    let (i, j) = site;
    prop2::select_by_curvature(|t| problem.g_eval(&x.with(i, j, t), site), theta1, theta2, sense)
}

/// Uniform random phases from a seed.
pub fn random_init(rows: usize, cols: usize, seed: u64) -> PhaseMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    PhaseMat::from_vec(rows, cols, &v).expect("finite phases")
}

/// What happened at one site.
enum SiteOutcome {
    Updated(f64),
    Degenerate,
}

fn ao_site(tag: ProblemTag, ev: &dyn fast::SiteKernel, theta0: f64) -> Result<SiteOutcome> {
    let mut v = None;
    for attempt in 0..=prop2::MAX_ROTATIONS {
        let phases = prop2::probe_phases(theta0 + attempt as f64 * prop2::PROBE_ROTATION);
        let mut kernels = [C64::ZERO; prop2::PROBES];
        for (k, &t) in kernels.iter_mut().zip(&phases) {
            *k = ev.kernel(t)?;
        }
        match prop2::recover_homogeneous(&phases, &kernels) {
            Ok(found) => {
                v = Some(found);
                break;
            }
            Err(Error::Degenerate(_)) | Err(Error::IllConditioned { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some(v) = v else { return Ok(SiteOutcome::Degenerate) };
    let (t1, t2) = match prop2::stationary_phases(&[v[0], v[1], v[2], v[3], v[4]]) {
        Ok(p) => p,
        Err(Error::Degenerate(_)) => return Ok(SiteOutcome::Degenerate),
        Err(e) => return Err(e),
    };
    let sigma = tag.sigma();
    let (t, flat) = prop2::select_by_curvature(|t| Ok(sigma * ev.kernel(t)?.im), t1, t2, tag.sense())?;
    if flat {
        return Ok(SiteOutcome::Degenerate);
    }
    Ok(SiteOutcome::Updated(t))
}

/// Sweep driver shared by the alternating solver and the coefficient-path
/// baseline: `sweep` runs one pass and returns how many sites it skipped.
pub(crate) fn sweep_solver<F>(
    problem: &CmProblem,
    init: &PhaseMat,
    eps: f64,
    max_iter: usize,
    mut sweep: F,
) -> Result<SolverReport>
where
    F: FnMut(&mut PhaseMat) -> Result<usize>,
{
    if !(eps > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("eps and max_iter must be positive".into()));
    }
    problem.check(init)?;
    let start = Instant::now();
    let sense = problem.sense();
    let mut x = init.clone();
    let mut f = problem.objective(&x)?;
    let mut trajectory = vec![f];
    let mut degenerate = 0;
    let mut converged = false;
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        degenerate += sweep(&mut x)?;
        let f_new = problem.objective(&x)?;
        trajectory.push(f_new);
        let done = rel_change_below(f_new, f, eps) || !sense.better(f_new, f);
        f = f_new;
        if done {
            converged = true;
            break;
        }
    }
    let mut rep = SolverReport::new(Solution::Phase(x), f);
    rep.trajectory = trajectory;
    rep.iterations = iters;
    rep.converged = converged;
    if degenerate > 0 {
        rep.flags.push(Flag::DegenerateSites(degenerate));
    }
    if !converged {
        rep.flags.push(Flag::MaxIterReached);
    }
    rep.seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Alternating optimization over all sites in row-major order with
/// immediate write-back. Each site costs five kernel probes, one 5-unknown
/// homogeneous solve and two to four kernel evaluations for the selection.
pub fn algorithm1_ao(problem: &CmProblem, init: &PhaseMat, eps: f64, max_iter: usize) -> Result<SolverReport> {
    let tag = problem.tag();
    let mut cached: Option<Box<dyn fast::SiteKernel + '_>> = None;
    sweep_solver(problem, init, eps, max_iter, |x| {
        // rebuilt once per sweep so rank updates cannot drift
        let ev = match cached.as_mut() {
            Some(ev) => {
                ev.refresh(x)?;
                ev
            }
            None => cached.insert(problem.evaluator(x)?),
        };
        let mut degenerate = 0;
        for site in x.sites() {
            ev.begin_site(site)?;
            match ao_site(tag, ev.as_ref(), x.get(site.0, site.1))? {
                SiteOutcome::Updated(t) => {
                    ev.commit(t)?;
                    x.set(site.0, site.1, t);
                }
                SiteOutcome::Degenerate => degenerate += 1,
            }
        }
        Ok(degenerate)
    })
}

/// Per-user alternating optimization for a separable multi-user quadratic
/// model; users run independently (in parallel when enabled).
pub fn solve_wmmse_multiuser(
    users: &[WmmseQuadScenario],
    inits: &[PhaseMat],
    eps: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<Vec<SolverReport>> {
    if users.len() != inits.len() {
        return Err(Error::DimensionMismatch(format!("{} users, {} initial points", users.len(), inits.len())));
    }
    let problems: Vec<CmProblem> = users.iter().cloned().map(CmProblem::Wmmse).collect();
    exec.map_range(users.len(), |u| algorithm1_ao(&problems[u], &inits[u], eps, max_iter)).into_iter().collect()
}

/// Objective along a single site's phase, sampled on `resolution` points.
pub fn slice_objective(
    problem: &CmProblem,
    x: &PhaseMat,
    site: (usize, usize),
    resolution: usize,
) -> Result<Vec<(f64, f64)>> {
    (0..resolution)
        .map(|k| {
            let t = wrap_phase(std::f64::consts::TAU * k as f64 / resolution as f64);
            Ok((t, problem.objective(&x.with(site.0, site.1, t))?))
        })
        .collect()
}
