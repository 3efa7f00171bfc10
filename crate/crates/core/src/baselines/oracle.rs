//! Projected-gradient oracle on a flat real parametrization.
//!
//! Gradients are central finite differences of the objective alone, so the
//! oracle shares no derivative code with the solvers it certifies.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derivatives::DiagVar;
use crate::diag_solvers::amp_irs::AmpIrsScenario;
use crate::diag_solvers::blockdiag::BlockDiagScenario;
use crate::diag_solvers::musimo::{musimo_capacity, musimo_mse, MuSimoScenario};
use crate::error::{Error, Result};
use crate::numkernel::{c, CMat, C64};
use crate::par::Execution;
use crate::report::{Flag, Sense, Solution, SolverReport};

/// Number of restarts; restart 0 starts from a fixed feasible point.
pub const RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Initial step length.
    pub step: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_iter: usize,
    /// Central-difference step.
    pub grad_step: f64,
    /// Relative objective change that ends a run.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { step: 1.0, armijo_c: 1e-4, shrink: 0.5, max_iter: 3000, grad_step: 1e-6, tol: 1e-12 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.step, self.armijo_c, self.shrink, self.grad_step, self.tol];
        if pos.iter().any(|&v| !(v > 0.0 && v.is_finite())) || self.max_iter == 0 {
            return Err(Error::InvalidInput("oracle parameters must be positive".into()));
        }
        if self.armijo_c >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::InvalidInput("armijo_c and shrink must be below 1".into()));
        }
        Ok(())
    }
}

/// Problems with a convex or smoothly parametrized feasible set.
#[derive(Debug, Clone, Copy)]
pub enum OracleTarget<'a> {
    MusimoCapacity(&'a MuSimoScenario),
    MusimoMse(&'a MuSimoScenario),
    AmpIrsCapacity(&'a AmpIrsScenario),
    AmpIrsMse(&'a AmpIrsScenario),
    /// `Q_k = P_k A_kA_k^H/‖A_k‖²` with `A_k` square and free.
    BlockDiagCapacity(&'a BlockDiagScenario),
}

impl OracleTarget<'_> {
    pub fn sense(&self) -> Sense {
        match self {
            OracleTarget::MusimoMse(_) | OracleTarget::AmpIrsMse(_) => Sense::Min,
            _ => Sense::Max,
        }
    }

    fn dim(&self) -> usize {
        match self {
            OracleTarget::MusimoCapacity(s) | OracleTarget::MusimoMse(s) => s.k(),
            OracleTarget::AmpIrsCapacity(s) | OracleTarget::AmpIrsMse(s) => 2 * s.k(),
            OracleTarget::BlockDiagCapacity(s) => s.h_users.iter().map(|h| 2 * h.ncols() * h.ncols()).sum(),
        }
    }

    /// Euclidean projection onto the feasible set.
    fn project(&self, v: &mut [f64]) {
        match self {
            OracleTarget::MusimoCapacity(s) | OracleTarget::MusimoMse(s) => project_box_simplex(v, &s.p_user, s.p_sum),
            OracleTarget::AmpIrsCapacity(s) | OracleTarget::AmpIrsMse(s) => project_ball(v, (s.k() as f64).sqrt()),
            OracleTarget::BlockDiagCapacity(_) => {}
        }
    }

    fn canonical(&self) -> Vec<f64> {
        match self {
            OracleTarget::MusimoCapacity(s) | OracleTarget::MusimoMse(s) => {
                vec![s.p_sum / s.k() as f64; s.k()]
            }
            OracleTarget::AmpIrsCapacity(s) | OracleTarget::AmpIrsMse(s) => {
                let mut v = vec![0.0; 2 * s.k()];
                v[..s.k()].fill(1.0);
                v
            }
            OracleTarget::BlockDiagCapacity(s) => {
                let mut v = Vec::with_capacity(self.dim());
                for h in &s.h_users {
                    let n = h.ncols();
                    for r in 0..n {
                        for col in 0..n {
                            v.push(if r == col { 1.0 } else { 0.0 });
                            v.push(0.0);
                        }
                    }
                }
                v
            }
        }
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            OracleTarget::MusimoCapacity(s) | OracleTarget::MusimoMse(s) => {
                s.p_user.iter().map(|&p| rng.random_range(0.0..=p)).collect()
            }
            _ => (0..self.dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    pub fn objective(&self, v: &[f64]) -> Result<f64> {
        match self {
            OracleTarget::MusimoCapacity(s) => musimo_capacity(&s.gram()?, v),
            OracleTarget::MusimoMse(s) => musimo_mse(&s.gram()?, v, s.n_t()),
            OracleTarget::AmpIrsCapacity(s) => s.capacity(&DiagVar::from_real_parts(v)?),
            OracleTarget::AmpIrsMse(s) => s.mse(&DiagVar::from_real_parts(v)?),
            OracleTarget::BlockDiagCapacity(s) => s.capacity(&blocks_from(s, v)?),
        }
    }

    fn solution(&self, v: &[f64]) -> Result<Solution> {
        Ok(match self {
            OracleTarget::MusimoCapacity(_) | OracleTarget::MusimoMse(_) => Solution::Power(v.to_vec()),
            OracleTarget::AmpIrsCapacity(_) | OracleTarget::AmpIrsMse(_) => {
                Solution::Diag(DiagVar::from_real_parts(v)?)
            }
            OracleTarget::BlockDiagCapacity(s) => Solution::Blocks(blocks_from(s, v)?),
        })
    }
}

/// Covariance blocks `P_k A_kA_k^H/‖A_k‖²` from the flat row-major `(re, im)`
/// layout of every `A_k`.
fn blocks_from(s: &BlockDiagScenario, v: &[f64]) -> Result<Vec<CMat>> {
    let mut off = 0;
    let mut out = Vec::with_capacity(s.k());
    for (h, &p) in s.h_users.iter().zip(&s.p_user) {
        let n = h.ncols();
        let a = CMat::from_fn(n, n, |r, col| {
            let k = off + 2 * (r * n + col);
            C64::new(v[k], v[k + 1])
        });
        off += 2 * n * n;
        let norm = a.norm_squared();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("zero covariance factor"));
        }
        out.push(&a * a.adjoint() * c(p / norm, 0.0));
    }
    Ok(out)
}

/// Projection onto `{0 ≤ v_k ≤ cap_k, Σv ≤ budget}` as `clip(y − τ)` with
/// the smallest feasible shift `τ ≥ 0`, found by bisection.
pub fn project_box_simplex(v: &mut [f64], caps: &[f64], budget: f64) {
    let clip =
        |y: &[f64], tau: f64| -> Vec<f64> { y.iter().zip(caps).map(|(&x, &cap)| (x - tau).clamp(0.0, cap)).collect() };
    let y = v.to_vec();
    let mut out = clip(&y, 0.0);
    if out.iter().sum::<f64>() > budget {
        let mut lo = 0.0;
        let mut hi = y.iter().cloned().fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clip(&y, mid).iter().sum::<f64>() > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out = clip(&y, hi);
    }
    v.copy_from_slice(&out);
}

/// Projection onto the Euclidean ball of the given radius.
pub fn project_ball(v: &mut [f64], radius: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

fn fd_grad(t: &OracleTarget<'_>, v: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut p = v.to_vec();
    let mut g = vec![0.0; v.len()];
    for k in 0..v.len() {
        let orig = p[k];
        p[k] = orig + h;
        let fp = t.objective(&p)?;
        p[k] = orig - h;
        let fm = t.objective(&p)?;
        p[k] = orig;
        g[k] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

struct Run {
    v: Vec<f64>,
    f: f64,
    f0: f64,
    iters: usize,
}

/// One projected-gradient run; minimizes `sign·f`.
fn run(t: &OracleTarget<'_>, cfg: &OracleConfig, mut v: Vec<f64>) -> Result<Run> {
    let sign = if t.sense() == Sense::Max { -1.0 } else { 1.0 };
    t.project(&mut v);
    let mut phi = sign * t.objective(&v)?;
    let f0 = sign * phi;
    let mut step = cfg.step;
    let mut iters = 0;
    for _ in 0..cfg.max_iter {
        iters += 1;
        let g = fd_grad(t, &v, cfg.grad_step)?;
        let mut moved = false;
        let mut tries = 0;
        while tries < 60 {
            tries += 1;
            let mut cand: Vec<f64> = v.iter().zip(&g).map(|(x, d)| x - step * sign * d).collect();
            t.project(&mut cand);
            let dec: f64 = g.iter().zip(cand.iter().zip(&v)).map(|(d, (a, b))| sign * d * (a - b)).sum();
            if let Ok(f) = t.objective(&cand) {
                let pc = sign * f;
                if pc <= phi + cfg.armijo_c * dec && dec <= 0.0 {
                    let change = (phi - pc).abs();
                    v = cand;
                    phi = pc;
                    moved = change > cfg.tol * phi.abs().max(1.0);
                    break;
                }
            }
            step *= cfg.shrink;
        }
        if !moved {
            break;
        }
        step = (step / cfg.shrink).min(1e6);
    }
    Ok(Run { f: sign * phi, f0, v, iters })
}

/// Best of [`RESTARTS`] projected-gradient runs; restart 0 starts from a
/// fixed feasible point, the others from points drawn from `seed`.
pub fn projected_gradient_oracle(
    target: &OracleTarget<'_>,
    cfg: &OracleConfig,
    seed: u64,
    exec: Execution,
) -> Result<SolverReport> {
    cfg.validate()?;
    let start = Instant::now();
    let sense = target.sense();
    let runs = exec.map_range(RESTARTS, |r| {
        let v0 = if r == 0 {
            target.canonical()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            target.random_start(&mut rng)
        };
        run(target, cfg, v0)
    });
    let mut best: Option<Run> = None;
    let mut improved = false;
    let mut iters = 0;
    for r in runs {
        let r = r?;
        iters += r.iters;
        improved |= sense.better(r.f, r.f0);
        if best.as_ref().is_none_or(|b| sense.better(r.f, b.f)) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one restart");
    let mut rep = SolverReport::new(target.solution(&best.v)?, best.f);
    rep.trajectory = vec![best.f0, best.f];
    rep.iterations = iters;
    rep.seed = Some(seed);
    if !improved {
        rep.flags.push(Flag::NoImprovement);
    }
    rep.seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_simplex_projection() {
        let mut v = vec![2.0, 2.0];
        project_box_simplex(&mut v, &[5.0, 5.0], 2.0);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        let mut v = vec![-1.0, 0.5];
        project_box_simplex(&mut v, &[0.3, 0.3], 10.0);
        assert_eq!(v, vec![0.0, 0.3]);
    }

    #[test]
    fn ball_projection() {
        let mut v = vec![3.0, 4.0];
        project_ball(&mut v, 1.0);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }
}
