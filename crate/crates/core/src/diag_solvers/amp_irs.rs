//! Amplitude-adjustable IRS: `H = H0 + H1ΛH2` with `Tr(ΛΛ^H) ≤ K`.
//!
//! Capacity `log|I + Σ^{-1}HH^H|` and MSE `Tr(I + Σ^{-1}HH^H)^{-1}` are
//! both handled by alternating the MMSE receiver `G`, the weight `W` and
//! the reflection diagonal. For the MSE variant `W` stays at identity.

use std::time::Instant;

use crate::derivatives::DiagVar;
use crate::diag_solvers::BISECTION_STEPS;
use crate::error::{Error, Result};
use crate::numkernel::{self, c, CMat, CVec, HermitianMat, PsdMat, C64};
use crate::report::{rel_change_below, Flag, Solution, SolverReport};

const BRACKET_DOUBLINGS: usize = 200;
/// Relative accuracy of the amplitude constraint after bisection.
const LAMBDA_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AmpIrsScenario {
    /// `N_r × N_t` direct link.
    pub h0: CMat,
    /// `N_r × K` IRS-to-user link.
    pub h1: CMat,
    /// `K × N_t` transmitter-to-IRS link.
    pub h2: CMat,
    /// `N_r × N_r`, already including the transmit covariance scaling.
    pub sigma: PsdMat,
}

impl AmpIrsScenario {
    pub fn new(h0: CMat, h1: CMat, h2: CMat, sigma: PsdMat) -> Result<Self> {
        let (nr, nt, k) = (h0.nrows(), h0.ncols(), h1.ncols());
        if h1.nrows() != nr || h2.nrows() != k || h2.ncols() != nt || sigma.dim() != nr {
            return Err(Error::DimensionMismatch(format!(
                "H0 {}x{}, H1 {}x{}, H2 {}x{}, Σ {}",
                nr,
                nt,
                h1.nrows(),
                k,
                h2.nrows(),
                h2.ncols(),
                sigma.dim()
            )));
        }
        for (m, what) in [(&h0, "H0"), (&h1, "H1"), (&h2, "H2")] {
            numkernel::ensure_finite(m, what)?;
        }
        numkernel::cholesky(sigma.as_mat())?;
        Ok(Self { h0, h1, h2, sigma })
    }

    pub fn k(&self) -> usize {
        self.h1.ncols()
    }

    pub fn n_t(&self) -> usize {
        self.h0.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h0.nrows()
    }

    /// `H0 + H1ΛH2`.
    pub fn channel(&self, lam: &DiagVar) -> CMat {
        let mut h1l = self.h1.clone();
        for (j, d) in lam.as_slice().iter().enumerate() {
            for i in 0..h1l.nrows() {
                h1l[(i, j)] *= d;
            }
        }
        &self.h0 + h1l * &self.h2
    }

    fn check(&self, lam: &DiagVar) -> Result<()> {
        if lam.k() != self.k() {
            return Err(Error::DimensionMismatch(format!("Λ has {} entries, K = {}", lam.k(), self.k())));
        }
        Ok(())
    }

    /// `log|I + Σ^{-1}HH^H|`.
    pub fn capacity(&self, lam: &DiagVar) -> Result<f64> {
        self.check(lam)?;
        let h = self.channel(lam);
        let a = numkernel::hermitize(&(self.sigma.as_mat() + &h * h.adjoint()))?;
        Ok(numkernel::logdet_hpd(&a)? - numkernel::logdet_hpd(self.sigma.as_herm())?)
    }

    /// `Tr[(I + Σ^{-1}HH^H)^{-1}]` on the `N_r` receive side.
    pub fn mse(&self, lam: &DiagVar) -> Result<f64> {
        self.check(lam)?;
        let h = self.channel(lam);
        let a = self.sigma.as_mat() + &h * h.adjoint();
        Ok(numkernel::trace_re(&(numkernel::inv_hpd(&a)? * self.sigma.as_mat())))
    }
}

/// MMSE receiver `G = H^H(Σ + HH^H)^{-1}`.
pub fn wmmse_update_g(s: &AmpIrsScenario, lam: &DiagVar) -> Result<CMat> {
    s.check(lam)?;
    let h = s.channel(lam);
    let a = s.sigma.as_mat() + &h * h.adjoint();
    Ok(h.adjoint() * numkernel::inv_hpd(&a)?)
}

/// Weight `W = (I − GH)^{-1}`; Hermitian positive definite for the MMSE `G`.
pub fn wmmse_update_w(s: &AmpIrsScenario, lam: &DiagVar, g: &CMat) -> Result<HermitianMat> {
    s.check(lam)?;
    let h = s.channel(lam);
    if g.nrows() != s.n_t() || g.ncols() != s.n_r() {
        return Err(Error::DimensionMismatch(format!("G is {}x{}", g.nrows(), g.ncols())));
    }
    let w = numkernel::inv(&(numkernel::identity(s.n_t()) - g * h))?;
    numkernel::hermitize(&w)
}

/// Result of the reflection-diagonal update.
#[derive(Debug, Clone)]
pub struct LambdaUpdate {
    pub lam: DiagVar,
    pub mu: f64,
    /// `‖(Φ + μI)λ + c‖`.
    pub kkt_residual: f64,
    /// `|μ (Tr(ΛΛ^H) − K)|`.
    pub slackness: f64,
}

/// Quadratic model `λ^HΦλ + 2Re{λ^H c}` of the weighted MSE in the diagonal.
pub fn lambda_subproblem(s: &AmpIrsScenario, g: &CMat, w: &HermitianMat) -> Result<(HermitianMat, CVec)> {
    let l = g * &s.h1;
    let e0 = g * &s.h0 - numkernel::identity(s.n_t());
    let r = &s.h2;
    let lwl = l.adjoint() * w.as_mat() * &l;
    let rr = r * r.adjoint();
    let phi = lwl.component_mul(&rr.transpose());
    let cvec = (l.adjoint() * w.as_mat() * e0 * r.adjoint()).diagonal();
    Ok((numkernel::hermitize(&phi)?, cvec))
}

/// Minimize the quadratic model under `Tr(ΛΛ^H) ≤ K`: `λ = −(Φ + μI)^{-1}c`
/// with `μ = 0` when feasible, otherwise bisected on `‖λ(μ)‖² = K`.
pub fn wmmse_update_lambda(s: &AmpIrsScenario, g: &CMat, w: &HermitianMat, tol: f64) -> Result<LambdaUpdate> {
    let (phi, cvec) = lambda_subproblem(s, g, w)?;
    solve_trust_region(&phi, &cvec, s.k() as f64, tol)
}

/// `min λ^HΦλ + 2Re{λ^H c}` s.t. `‖λ‖² ≤ budget`, Φ PSD.
pub fn solve_trust_region(phi: &HermitianMat, cvec: &CVec, budget: f64, tol: f64) -> Result<LambdaUpdate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let k = cvec.len();
    let (w, u) = numkernel::eigh(phi);
    let z = u.adjoint() * cvec;
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let cnorm = cvec.norm();
    let flat = 1e-12 * wmax.max(f64::MIN_POSITIVE);

    let lam_at = |mu: f64| -> CVec {
        let y = CVec::from_iterator(
            k,
            (0..k).map(|i| {
                let d = w[i].max(0.0) + mu;
                if d <= flat {
                    C64::ZERO
                } else {
                    -z[i] / d
                }
            }),
        );
        &u * y
    };
    let norm2 = |mu: f64| -> f64 {
        (0..k)
            .map(|i| {
                let d = w[i].max(0.0) + mu;
                if d <= flat {
                    if z[i].norm() <= 1e-14 * cnorm.max(1e-300) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    z[i].norm_sqr() / (d * d)
                }
            })
            .sum()
    };

    let mu = if cnorm == 0.0 || norm2(0.0) <= budget {
        0.0
    } else {
        let mut hi = 1.0;
        let mut ok = false;
        for _ in 0..BRACKET_DOUBLINGS {
            if norm2(hi) <= budget {
                ok = true;
                break;
            }
            hi *= 2.0;
        }
        if !ok {
            return Err(Error::Bracket("amplitude multiplier"));
        }
        let mut lo = 0.0;
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if norm2(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if (budget - norm2(hi)) <= tol.max(LAMBDA_TOL) * budget || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        hi
    };
    let lam = lam_at(mu);
    let resid = (phi.as_mat() * &lam + &lam * c(mu, 0.0) + cvec).norm();
    let energy = lam.norm_squared();
    let lam = DiagVar::new(lam.iter().cloned().collect())?;
    Ok(LambdaUpdate { lam, mu, kkt_residual: resid, slackness: (mu * (energy - budget)).abs() })
}

/// Deterministic feasible start: unit amplitude, zero phase.
pub fn amp_irs_init(k: usize) -> DiagVar {
    DiagVar::new(vec![C64::ONE; k]).expect("finite")
}

fn ao(s: &AmpIrsScenario, eps: f64, max_iter: usize, weighted: bool) -> Result<SolverReport> {
    if !(eps > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("eps and max_iter must be positive".into()));
    }
    let start = Instant::now();
    let objective = |lam: &DiagVar| if weighted { s.capacity(lam) } else { s.mse(lam) };
    let mut lam = amp_irs_init(s.k());
    let mut f = objective(&lam)?;
    let mut trajectory = vec![f];
    let mut converged = false;
    let mut iters = 0;
    let mut last = None;
    let identity = HermitianMat::identity(s.n_t());
    for _ in 0..max_iter {
        iters += 1;
        let g = wmmse_update_g(s, &lam)?;
        let upd = if weighted {
            let w = wmmse_update_w(s, &lam, &g)?;
            wmmse_update_lambda(s, &g, &w, LAMBDA_TOL)?
        } else {
            wmmse_update_lambda(s, &g, &identity, LAMBDA_TOL)?
        };
        lam = upd.lam.clone();
        let f_new = objective(&lam)?;
        trajectory.push(f_new);
        last = Some(upd);
        let done = rel_change_below(f_new, f, eps);
        f = f_new;
        if done {
            converged = true;
            break;
        }
    }
    let mut rep = SolverReport::new(Solution::Diag(lam), f);
    rep.trajectory = trajectory;
    rep.iterations = iters;
    rep.converged = converged;
    if let Some(u) = last {
        rep.kkt_residual = Some(u.kkt_residual);
        rep.slackness_residual = Some(u.slackness);
    }
    if !converged {
        rep.flags.push(Flag::MaxIterReached);
    }
    rep.seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Capacity maximization by WMMSE alternation.
pub fn solve_amp_irs_capacity(s: &AmpIrsScenario, eps: f64, max_iter: usize) -> Result<SolverReport> {
    ao(s, eps, max_iter, true)
}

/// MSE minimization by the same alternation with `W = I`.
pub fn solve_amp_irs_mse(s: &AmpIrsScenario, eps: f64, max_iter: usize) -> Result<SolverReport> {
    ao(s, eps, max_iter, false)
}
