//! Block-diagonal MU-MIMO uplink: `max log|I + Σ^{-1} Σ_k H_kQ_kH_k^H|`
//! with `Tr(Q_k) ≤ P_k`, solved by cyclic eigenspace alignment.

use std::time::Instant;

use crate::diag_solvers::waterfill;
use crate::error::{Error, Result};
use crate::numkernel::{self, c, CMat, PsdMat};
use crate::report::{rel_change_below, Flag, Solution, SolverReport};

/// Sweep limit for the cyclic user updates.
pub const MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone)]
pub struct BlockDiagScenario {
    /// Per-user `N_t × N_r` channels sharing the receive dimension `N_t`.
    pub h_users: Vec<CMat>,
    pub sigma: PsdMat,
    pub p_user: Vec<f64>,
}

impl BlockDiagScenario {
    pub fn new(h_users: Vec<CMat>, sigma: PsdMat, p_user: Vec<f64>) -> Result<Self> {
        if h_users.is_empty() || h_users.len() != p_user.len() {
            return Err(Error::DimensionMismatch(format!("{} channels for {} budgets", h_users.len(), p_user.len())));
        }
        let nt = sigma.dim();
        for h in &h_users {
            if h.nrows() != nt {
                return Err(Error::DimensionMismatch(format!("user channel has {} rows, Σ is {nt}", h.nrows())));
            }
            numkernel::ensure_finite(h, "user channel")?;
        }
        if p_user.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput("per-user budgets must be positive".into()));
        }
        numkernel::cholesky(sigma.as_mat())?;
        Ok(Self { h_users, sigma, p_user })
    }

    pub fn k(&self) -> usize {
        self.h_users.len()
    }

    /// `log|I + Σ^{-1} Σ_k H_kQ_kH_k^H|`.
    pub fn capacity(&self, q: &[CMat]) -> Result<f64> {
        if q.len() != self.k() {
            return Err(Error::DimensionMismatch(format!("{} blocks for {} users", q.len(), self.k())));
        }
        let mut a = self.sigma.as_mat().clone();
        for (h, qk) in self.h_users.iter().zip(q) {
            if qk.nrows() != h.ncols() || qk.ncols() != h.ncols() {
                return Err(Error::DimensionMismatch("covariance block size".into()));
            }
            a += h * qk * h.adjoint();
        }
        Ok(numkernel::logdet_hpd(&numkernel::hermitize(&a)?)? - numkernel::logdet_hpd(self.sigma.as_herm())?)
    }
}

/// Best response of user `k` given the other blocks.
fn user_update(s: &BlockDiagScenario, s_half_inv: &CMat, q: &[CMat], k: usize) -> Result<CMat> {
    let nt = s.sigma.dim();
    let mut l = numkernel::identity(nt);
    for (j, (h, qj)) in s.h_users.iter().zip(q).enumerate() {
        if j != k {
            let sh = s_half_inv * h;
            l += &sh * qj * sh.adjoint();
        }
    }
    let l = PsdMat::new(numkernel::hermitize(&l)?)?;
    let l_inv_half = numkernel::psd_inv_sqrt(&l)?;
    let eff = l_inv_half.as_mat() * s_half_inv * &s.h_users[k];
    let dec = numkernel::svd(&eff)?;
    let nr = s.h_users[k].ncols();
    let smax = dec.s.first().cloned().unwrap_or(0.0);
    let keep: Vec<usize> = (0..dec.s.len()).filter(|&i| dec.s[i] > 1e-12 * smax.max(1e-300)).collect();
    if keep.is_empty() {
        return Ok(CMat::zeros(nr, nr));
    }
    let gains: Vec<f64> = keep.iter().map(|&i| dec.s[i] * dec.s[i]).collect();
    let caps = vec![s.p_user[k]; gains.len()];
    let p = waterfill(&gains, s.p_user[k], &caps)?;
    let mut qk = CMat::zeros(nr, nr);
    for (&i, &pi) in keep.iter().zip(&p) {
        let v = dec.v.column(i);
        qk += v * v.adjoint() * c(pi, 0.0);
    }
    Ok(numkernel::hermitize(&qk)?.into_inner())
}

/// Cyclic best responses until the objective change drops below `eps`.
pub fn solve_blockdiag_capacity(s: &BlockDiagScenario, eps: f64, tol: f64) -> Result<SolverReport> {
    if !(eps > 0.0 && tol > 0.0) {
        return Err(Error::InvalidInput("eps and tol must be positive".into()));
    }
    let start = Instant::now();
    let s_half_inv = numkernel::psd_inv_sqrt(&s.sigma)?.into_inner();
    let mut q: Vec<CMat> = s.h_users.iter().map(|h| CMat::zeros(h.ncols(), h.ncols())).collect();
    let mut f = s.capacity(&q)?;
    let mut trajectory = vec![f];
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..MAX_SWEEPS {
        iters += 1;
        for k in 0..s.k() {
            q[k] = user_update(s, &s_half_inv, &q, k)?;
        }
        let f_new = s.capacity(&q)?;
        trajectory.push(f_new);
        let done = rel_change_below(f_new, f, eps);
        f = f_new;
        if done {
            converged = true;
            break;
        }
    }
    let mut rep = SolverReport::new(Solution::Blocks(q), f);
    rep.trajectory = trajectory;
    rep.iterations = iters;
    rep.converged = converged;
    if !converged {
        rep.flags.push(Flag::MaxIterReached);
    }
    rep.seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_diagonal_channel() {
        let h = numkernel::real_diag(&[2.0, 1.0]);
        let s = BlockDiagScenario::new(vec![h], PsdMat::identity(2), vec![1.0]).unwrap();
        let rep = solve_blockdiag_capacity(&s, 1e-12, 1e-10).unwrap();
        // gains 4 and 1: level 1/μ with (1/μ − 1/4) + (1/μ − 1) = 1 → 1/μ = 9/8
        let want = (4.0f64 * 9.0 / 8.0).ln() + (9.0f64 / 8.0).ln();
        assert!((rep.objective - want).abs() < 1e-10);
        let q = &rep.blocks().unwrap()[0];
        assert!((numkernel::trace_re(q) - 1.0).abs() < 1e-10);
    }
}
