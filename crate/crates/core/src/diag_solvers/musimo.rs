//! Multi-user SIMO uplink: per-user powers `Λ = diag(λ)` under a sum budget
//! and per-user caps.
//!
//! Both objectives reduce to the `K×K` matrix `G = H^HΣ^{-1}H`:
//! capacity is `log|I + GΛ|` and MSE is `N_t − K + Tr(I + GΛ)^{-1}`.
//! With every other power fixed, coordinate `k` sees
//! `J_k = I + GΛ_{−k}`, `c_k = [J_k^{-1}G]_{kk}` and `d_k = [J_k^{-2}G]_{kk}`.

use std::time::Instant;

use crate::diag_solvers::BISECTION_STEPS;
use crate::error::{Error, Result};
use crate::numkernel::{self, c, CMat, CVec, PsdMat};
use crate::report::{Flag, Solution, SolverReport};

/// Inner fixed-point stopping rule on the max-norm allocation change.
pub const INNER_TOL: f64 = 1e-12;
const INNER_MAX_SWEEPS: usize = 10_000;
const BRACKET_DOUBLINGS: usize = 200;

#[derive(Debug, Clone)]
pub struct MuSimoScenario {
    /// `N_t × K`, column `k` is user k's channel.
    pub h: CMat,
    pub sigma: PsdMat,
    /// Watts.
    pub p_sum: f64,
    /// Watts, length K.
    pub p_user: Vec<f64>,
}

impl MuSimoScenario {
    pub fn new(h: CMat, sigma: PsdMat, p_sum: f64, p_user: Vec<f64>) -> Result<Self> {
        numkernel::ensure_finite(&h, "MuSimoScenario::h")?;
        if sigma.dim() != h.nrows() {
            return Err(Error::DimensionMismatch(format!("Σ is {0}x{0} but H has {1} rows", sigma.dim(), h.nrows())));
        }
        if p_user.len() != h.ncols() {
            return Err(Error::DimensionMismatch(format!("{} caps for {} users", p_user.len(), h.ncols())));
        }
        if !(p_sum > 0.0) || p_user.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidInput("power budgets must be positive".into()));
        }
        numkernel::cholesky(sigma.as_mat())?;
        Ok(Self { h, sigma, p_sum, p_user })
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_t(&self) -> usize {
        self.h.nrows()
    }

    /// `G = H^HΣ^{-1}H`.
    pub fn gram(&self) -> Result<CMat> {
        let si = numkernel::inv_hpd(self.sigma.as_mat())?;
        let g = self.h.adjoint() * si * &self.h;
        Ok(numkernel::hermitize(&g)?.into_inner())
    }
}

/// Per-coordinate quantities at a given allocation and multiplier.
#[derive(Debug, Clone)]
pub struct KktWorkspace {
    /// `J_k = I + GΛ_{−k}`.
    pub j_k: Vec<CMat>,
    pub mu: f64,
    /// Cap multipliers `ψ_k ≥ 0`.
    pub psi: Vec<f64>,
    pub c_k: Vec<f64>,
    pub d_k: Vec<f64>,
    /// Quadratic `ã λ² + b̃ λ + x = 0` of the MSE stationarity condition.
    pub a_tilde: Vec<f64>,
    pub b_tilde: Vec<f64>,
    pub x_k: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Capacity,
    Mse,
}

fn sqrt_lam(lam: &[f64]) -> CMat {
    numkernel::real_diag(&lam.iter().map(|&l| l.max(0.0).sqrt()).collect::<Vec<_>>())
}

/// `log|I + Σ^{-1}HΛH^H|`.
pub fn musimo_capacity(g: &CMat, lam: &[f64]) -> Result<f64> {
    let s = sqrt_lam(lam);
    let a = numkernel::hermitize(&(numkernel::identity(lam.len()) + &s * g * &s))?;
    numkernel::logdet_hpd(&a)
}

/// `Tr[(I + Σ^{-1}HΛH^H)^{-1}]` on the `N_t`-dimensional receive side.
pub fn musimo_mse(g: &CMat, lam: &[f64], n_t: usize) -> Result<f64> {
    let k = lam.len();
    let s = sqrt_lam(lam);
    let a = numkernel::identity(k) + &s * g * &s;
    Ok((n_t as f64 - k as f64) + numkernel::trace_re(&numkernel::inv_hpd(&a)?))
}

/// `J_k^{-1}` from `(I + GΛ)^{-1}` by removing user k's rank-one term.
fn j_inverse(g: &CMat, b: &CMat, lam: &[f64], k: usize) -> Result<CMat> {
    let n = lam.len();
    if lam[k] == 0.0 {
        return Ok(b.clone());
    }
    let u = g.column(k).map(|z| z * c(-lam[k], 0.0));
    let mut v = CVec::zeros(n);
    v[k] = c(1.0, 0.0);
    match numkernel::sherman_morrison_inv(b, &u, &v) {
        Ok(ji) => Ok(ji),
        Err(Error::SingularUpdate { .. }) => {
            let mut l = lam.to_vec();
            l[k] = 0.0;
            numkernel::inv(&(numkernel::identity(n) + g * numkernel::real_diag(&l)))
        }
        Err(e) => Err(e),
    }
}

fn full_inverse(g: &CMat, lam: &[f64]) -> Result<CMat> {
    numkernel::inv(&(numkernel::identity(lam.len()) + g * numkernel::real_diag(lam)))
}

/// `(c_k, d_k)` for every coordinate at `lam`.
fn coord_terms(g: &CMat, lam: &[f64], k: usize, b: &CMat) -> Result<(f64, f64, CMat)> {
    let ji = j_inverse(g, b, lam, k)?;
    let jg = &ji * g;
    let ck = jg[(k, k)].re;
    let dk = (&ji * &jg)[(k, k)].re;
    Ok((ck, dk, ji))
}

/// Optimal power of one coordinate given the others and `μ`.
fn coord_update(kind: Kind, ck: f64, dk: f64, mu: f64, cap: f64) -> (f64, bool) {
    if mu <= 0.0 {
        return (cap, false);
    }
    match kind {
        Kind::Capacity => {
            if ck <= 0.0 {
                (0.0, false)
            } else {
                ((1.0 / mu - 1.0 / ck).clamp(0.0, cap), false)
            }
        }
        Kind::Mse => {
            // Lagrangian restricted to the coordinate, up to a constant.
            let lag = |l: f64| -l * dk / (1.0 + l * ck) + mu * l;
            if ck <= 0.0 || dk <= 0.0 {
                return (0.0, false);
            }
            let disc = dk / mu;
            if !(disc >= 0.0) {
                let best = if lag(cap) < lag(0.0) { cap } else { 0.0 };
                return (best, true);
            }
            let r = disc.sqrt();
            let roots = [((-1.0 + r) / ck).clamp(0.0, cap), ((-1.0 - r) / ck).clamp(0.0, cap)];
            let best = if lag(roots[0]) <= lag(roots[1]) { roots[0] } else { roots[1] };
            (best, false)
        }
    }
}

struct Inner {
    sweeps: usize,
    converged: bool,
    boundary_fallback: Option<usize>,
}

/// Cyclic coordinate updates at fixed `μ` until the allocation settles.
fn fixed_point(kind: Kind, g: &CMat, lam: &mut [f64], mu: f64, caps: &[f64]) -> Result<Inner> {
    let n = lam.len();
    let mut fallback = None;
    for sweep in 1..=INNER_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for k in 0..n {
            let b = full_inverse(g, lam)?;
            let (ck, dk, _) = coord_terms(g, lam, k, &b)?;
            let (new, fb) = coord_update(kind, ck, dk, mu, caps[k]);
            if fb {
                fallback = Some(k);
            }
            change = change.max((new - lam[k]).abs());
            lam[k] = new;
        }
        if change <= INNER_TOL {
            return Ok(Inner { sweeps: sweep, converged: true, boundary_fallback: fallback });
        }
    }
    Ok(Inner { sweeps: INNER_MAX_SWEEPS, converged: false, boundary_fallback: fallback })
}

/// Build the KKT workspace at a candidate solution.
pub fn musimo_workspace(s: &MuSimoScenario, lam: &[f64], mu: f64, mse: bool) -> Result<KktWorkspace> {
    let g = s.gram()?;
    let b = full_inverse(&g, lam)?;
    let k = s.k();
    let mut ws = KktWorkspace {
        j_k: Vec::with_capacity(k),
        mu,
        psi: vec![0.0; k],
        c_k: vec![0.0; k],
        d_k: vec![0.0; k],
        a_tilde: vec![0.0; k],
        b_tilde: vec![0.0; k],
        x_k: vec![0.0; k],
    };
    let marg = marginals(&g, lam, mse)?;
    for i in 0..k {
        let (ck, dk, _) = coord_terms(&g, lam, i, &b)?;
        let mut others = lam.to_vec();
        others[i] = 0.0;
        ws.j_k.push(numkernel::identity(k) + &g * numkernel::real_diag(&others));
        ws.c_k[i] = ck;
        ws.d_k[i] = dk;
        ws.a_tilde[i] = -ck * ck * mu;
        ws.b_tilde[i] = -2.0 * ck * mu;
        ws.x_k[i] = dk - mu;
        ws.psi[i] = (marg[i] - mu).max(0.0);
    }
    Ok(ws)
}

/// Benefit of extra power per coordinate: `∂f/∂λ_k` for capacity and
/// `−∂f/∂λ_k` for MSE.
fn marginals(g: &CMat, lam: &[f64], mse: bool) -> Result<Vec<f64>> {
    let b = full_inverse(g, lam)?;
    let bg = &b * g;
    let m = if mse { &b * &bg } else { bg };
    Ok((0..lam.len()).map(|k| m[(k, k)].re).collect())
}

/// `(stationarity residual, complementary-slackness residual)`.
///
/// Stationarity covers every coordinate: interior ones must balance the
/// multiplier, zero ones must not want power, capped ones must want more.
pub fn kkt_residuals(s: &MuSimoScenario, lam: &[f64], mu: f64, mse: bool) -> Result<(f64, f64)> {
    let g = s.gram()?;
    let m = marginals(&g, lam, mse)?;
    let edge = 1e-12;
    let mut stat: f64 = 0.0;
    let mut slack: f64 = mu * (lam.iter().sum::<f64>() - s.p_sum).abs();
    for k in 0..lam.len() {
        let cap = s.p_user[k];
        let r = if lam[k] <= edge {
            (m[k] - mu).max(0.0)
        } else if lam[k] >= cap - edge {
            (mu - m[k]).max(0.0)
        } else {
            (m[k] - mu).abs()
        };
        stat = stat.max(r);
        let psi = (m[k] - mu).max(0.0);
        slack = slack.max(psi * (lam[k] - cap).abs());
    }
    Ok((stat, slack))
}

fn solve(kind: Kind, s: &MuSimoScenario, tol: f64) -> Result<SolverReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let start = Instant::now();
    let g = s.gram()?;
    let caps = &s.p_user;
    let k = s.k();
    let mut flags = Vec::new();
    let mut total_sweeps = 0;

    let mut run = |mu: f64, lam: &mut Vec<f64>| -> Result<f64> {
        let inner = fixed_point(kind, &g, lam, mu, caps)?;
        total_sweeps += inner.sweeps;
        if !inner.converged {
            flags.push(Flag::InnerNotConverged);
        }
        if let Some(coord) = inner.boundary_fallback {
            flags.push(Flag::BoundaryFallback { coord });
        }
        Ok(lam.iter().sum())
    };

    let (lam, mu) = if caps.iter().sum::<f64>() <= s.p_sum {
        (caps.clone(), 0.0)
    } else {
        // Bracket: the allocation total decreases in μ.
        let mut hi = 1.0;
        let mut lam_hi = vec![0.0; k];
        let mut found = false;
        for _ in 0..BRACKET_DOUBLINGS {
            if run(hi, &mut lam_hi)? <= s.p_sum {
                found = true;
                break;
            }
            hi *= 2.0;
        }
        if !found {
            return Err(Error::Bracket("sum-power multiplier"));
        }
        let mut lo = 0.0;
        let mut lam_mid = lam_hi.clone();
        for _ in 0..BISECTION_STEPS {
            if s.p_sum - lam_hi.iter().sum::<f64>() <= tol * s.p_sum {
                break;
            }
            let mid = 0.5 * (lo + hi);
            lam_mid.clone_from(&lam_hi);
            if run(mid, &mut lam_mid)? > s.p_sum {
                lo = mid;
            } else {
                hi = mid;
                lam_hi.clone_from(&lam_mid);
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        (lam_hi, hi)
    };

    let mse = kind == Kind::Mse;
    let objective = if mse { musimo_mse(&g, &lam, s.n_t())? } else { musimo_capacity(&g, &lam)? };
    let (stat, slack) = kkt_residuals(s, &lam, mu, mse)?;
    flags.dedup();
    let mut rep = SolverReport::new(Solution::Power(lam), objective);
    rep.iterations = total_sweeps;
    rep.seconds = start.elapsed().as_secs_f64();
    rep.kkt_residual = Some(stat);
    rep.slackness_residual = Some(slack);
    rep.converged = !flags.contains(&Flag::InnerNotConverged);
    rep.flags = flags;
    Ok(rep)
}

/// Capacity-maximizing powers: water-filling per coordinate with `μ`
/// bisected against the sum budget.
pub fn solve_musimo_capacity(s: &MuSimoScenario, tol: f64) -> Result<SolverReport> {
    solve(Kind::Capacity, s, tol)
}

/// MSE-minimizing powers: per-coordinate quadratic roots with `μ` bisected
/// against the sum budget.
pub fn solve_musimo_mse(s: &MuSimoScenario, tol: f64) -> Result<SolverReport> {
    solve(Kind::Mse, s, tol)
}

/// Multiplier recovered from an allocation: the common marginal of the
/// interior coordinates (0 when every cap binds inside the budget).
pub fn implied_mu(s: &MuSimoScenario, lam: &[f64], mse: bool) -> Result<f64> {
    let g = s.gram()?;
    let m = marginals(&g, lam, mse)?;
    let interior: Vec<f64> =
        (0..lam.len()).filter(|&k| lam[k] > 1e-12 && lam[k] < s.p_user[k] - 1e-12).map(|k| m[k]).collect();
    if interior.is_empty() {
        return Ok(0.0);
    }
    Ok(interior.iter().sum::<f64>() / interior.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c, C64};

    fn scenario(h: CMat, p: f64, caps: Vec<f64>) -> MuSimoScenario {
        let n = h.nrows();
        MuSimoScenario::new(h, PsdMat::identity(n), p, caps).unwrap()
    }

    #[test]
    fn single_user_cap_binds() {
        let h = CMat::from_column_slice(2, 1, &[C64::ONE, C64::ZERO]);
        let s = scenario(h, 2.0, vec![2.0]);
        let rep = solve_musimo_capacity(&s, 1e-8).unwrap();
        assert!((rep.powers().unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((rep.objective - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_user_budget_binds() {
        let h = CMat::from_column_slice(2, 1, &[C64::ONE, C64::ZERO]);
        let s = scenario(h, 1.5, vec![2.0]);
        let rep = solve_musimo_capacity(&s, 1e-10).unwrap();
        assert!((rep.powers().unwrap()[0] - 1.5).abs() < 1e-9);
        assert!((rep.objective - 2.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_equal_gains_split_evenly() {
        let h = CMat::from_fn(4, 3, |i, j| if i == j { c(0.0, 2.0) } else { C64::ZERO });
        let s = scenario(h, 0.9, vec![1.0; 3]);
        for rep in [solve_musimo_capacity(&s, 1e-10).unwrap(), solve_musimo_mse(&s, 1e-10).unwrap()] {
            for &p in rep.powers().unwrap() {
                assert!((p - 0.3).abs() < 1e-8, "{p}");
            }
        }
    }

    #[test]
    fn mse_vanishing_power_gives_identity_trace() {
        let h = CMat::from_fn(3, 2, |i, j| c(1.0 + i as f64, j as f64 - 0.5));
        let s = scenario(h, 1e-12, vec![1.0, 1.0]);
        let rep = solve_musimo_mse(&s, 1e-8).unwrap();
        assert!((rep.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn mse_scalar_uses_min_of_budget_and_cap() {
        let h = CMat::from_element(1, 1, c(0.7, 0.2));
        for (p, cap) in [(0.5, 2.0), (3.0, 1.25)] {
            let s = scenario(h.clone(), p, vec![cap]);
            let rep = solve_musimo_mse(&s, 1e-10).unwrap();
            assert!((rep.powers().unwrap()[0] - f64::min(p, cap)).abs() < 1e-8);
        }
    }
}
