//! Per-site closed forms built from explicit coefficient extraction. These
//! carry the per-site inversions and decompositions, so they back the
//! element-wise baseline and serve as a cross-check of the probe path.

use std::f64::consts::PI;

use super::prop2::coeff_phases;
use super::{unit_column, CmCoeffs, CmProblem, HybridScenario, PassiveIrsScenario, WmmseQuadScenario};
use crate::derivatives::{wrap_phase, PhaseMat};
use crate::error::{Error, Result};
use crate::numkernel::{self, c, CMat, CVec, C64};

/// Arguments below this (relative) size leave every phase stationary.
const VANISHING: f64 = 1e-12;

/// Intermediates of the hybrid closed forms at site `(i, j)`.
#[derive(Debug, Clone)]
pub struct HybridScratch {
    /// `A_j = I + X̃_jX̃_j^HΠ`.
    pub a_j_mat: CMat,
    /// `ΠA_j^{-1}`.
    pub t1: CMat,
    /// `ΠA_j^{-2}`.
    pub t2: CMat,
    /// `1 + x_j^H T1 x_j`.
    pub n_j: C64,
    /// `x_j^H T2 x_j`.
    pub m_j: C64,
    pub zeta_n: C64,
    pub zeta_m: C64,
    /// `Σ_{l≠i} [T1]_{il} x_l`.
    pub e: C64,
    /// `Σ_{l≠i} [T2]_{il} x_l`.
    pub f: C64,
    pub a: C64,
    pub b: C64,
}

/// Intermediates of the passive IRS closed forms at element `i`.
#[derive(Debug, Clone)]
pub struct IrsScratch {
    /// `Γ_i = h̃_{1,i}h_{2,i}` (whitened).
    pub gamma_i: CMat,
    /// `M_i = H̃ − e^{jθ_i}Γ_i`.
    pub m_i_mat: CMat,
    /// `Φ_i = M_iM_i^H + Γ_iΓ_i^H + I`.
    pub phi_i: CMat,
    /// Rank-one split `M_iΓ_i^H = v_iu_i^H`.
    pub v_i: CVec,
    pub u_i: CVec,
    /// `Ψ_i = Φ_i + v_iv_i^H + u_iu_i^H`.
    pub psi_i: CMat,
    /// `v_i^HΨ_i^{-1}u_i`.
    pub a2_i: C64,
    /// `v^HΦ^{-1}v`, `u^HΦ^{-1}u`, `v^HΦ^{-1}u`.
    pub a_i: C64,
    pub b_i: C64,
    pub beta_i: C64,
    /// `1 + |β|² − ab + 2Re{βX}`; real up to rounding.
    pub d_i: C64,
    /// `v^HΦ^{-2}v`, `u^HΦ^{-2}u`, `v^HΦ^{-2}u`.
    pub s_vv: C64,
    pub s_uu: C64,
    pub s_vu: C64,
}

#[derive(Debug, Clone)]
pub enum ScratchIntermediates {
    Hybrid(HybridScratch),
    Irs(IrsScratch),
}

impl ScratchIntermediates {
    /// Largest imaginary part, relative to magnitude, among the quantities
    /// that must be real.
    pub fn reality_residual(&self) -> f64 {
        let rel = |z: C64| z.im.abs() / z.norm().max(1.0);
        match self {
            ScratchIntermediates::Hybrid(h) => {
                [h.n_j, h.m_j, h.a, h.b, h.zeta_n, h.zeta_m].into_iter().map(rel).fold(0.0, f64::max)
            }
            ScratchIntermediates::Irs(s) => {
                [s.a_i, s.b_i, s.d_i, s.s_vv, s.s_uu].into_iter().map(rel).fold(0.0, f64::max)
            }
        }
    }
}

fn check_hybrid_site(s: &HybridScenario, x: &PhaseMat, site: (usize, usize)) -> Result<()> {
    if x.rows() != s.n_t() || x.cols() != s.n_rf || site.0 >= x.rows() || site.1 >= x.cols() {
        return Err(Error::DimensionMismatch(format!("site {:?} on {}x{}", site, x.rows(), x.cols())));
    }
    Ok(())
}

pub fn hybrid_scratch(s: &HybridScenario, x: &PhaseMat, site: (usize, usize)) -> Result<HybridScratch> {
    check_hybrid_site(s, x, site)?;
    hybrid_scratch_mat(s, &x.x(), site)
}

fn hybrid_scratch_mat(s: &HybridScenario, xm: &CMat, (i, j): (usize, usize)) -> Result<HybridScratch> {
    let nt = s.n_t();
    let pi = s.pi_m.as_mat();
    let xj = xm.column(j).clone_owned();
    let others = xm * xm.adjoint() - &xj * xj.adjoint();
    let a_j_mat = numkernel::identity(nt) + others * pi;
    let ainv = numkernel::inv(&a_j_mat)?;
    let t1 = pi * &ainv;
    let t2 = &t1 * &ainv;
    let mut x_rest = xj.clone();
    x_rest[i] = C64::ZERO;
    let e = (t1.row(i) * &x_rest)[(0, 0)];
    let f = (t2.row(i) * &x_rest)[(0, 0)];
    let a = t1[(i, i)];
    let b = t2[(i, i)];
    let zeta_n = C64::ONE + a + x_rest.dotc(&(&t1 * &x_rest));
    let zeta_m = b + x_rest.dotc(&(&t2 * &x_rest));
    let n_j = C64::ONE + xj.dotc(&(&t1 * &xj));
    let m_j = xj.dotc(&(&t2 * &xj));
    Ok(HybridScratch { a_j_mat, t1, t2, n_j, m_j, zeta_n, zeta_m, e, f, a, b })
}

fn hybrid_capacity_coeffs(h: &HybridScratch, x: C64) -> CmCoeffs {
    let n = h.zeta_n.re + 2.0 * (x.conj() * h.e).re;
    CmCoeffs { a: h.e.conj(), b: C64::ZERO, c: c(h.a.re, 0.0), d: n }
}

fn hybrid_mse_coeffs(h: &HybridScratch, x: C64) -> CmCoeffs {
    let (a, b, zn, zm) = (h.a.re, h.b.re, h.zeta_n.re, h.zeta_m.re);
    let (e, f) = (h.e, h.f);
    let n = zn + 2.0 * (x.conj() * e).re;
    CmCoeffs {
        a: f.conj() * zn + e.conj() * b - e.conj() * zm - f.conj() * a,
        b: e * b - f * a,
        c: c(zn * b - zm * a, 0.0) + e * f.conj() - f * e.conj(),
        d: n * n,
    }
}

/// Both phases aligning a linear kernel `conj(arg)·X`: `Phase{arg}` and
/// `Phase{arg} + π`.
fn linear_pair(arg: C64, scale: f64) -> Result<(f64, f64)> {
    if arg.norm() <= VANISHING * scale.max(1.0) {
        return Err(Error::Degenerate("any phase stationary"));
    }
    let t = wrap_phase(arg.arg());
    Ok((t, wrap_phase(t + PI)))
}

pub fn closed_phase_hybrid_capacity(s: &HybridScenario, x: &PhaseMat, site: (usize, usize)) -> Result<(f64, f64)> {
    let h = hybrid_scratch(s, x, site)?;
    linear_pair(h.e, h.a.norm())
}

pub fn closed_phase_hybrid_mse(s: &HybridScenario, x: &PhaseMat, site: (usize, usize)) -> Result<(f64, f64)> {
    let h = hybrid_scratch(s, x, site)?;
    let k = hybrid_mse_coeffs(&h, x.entry(site.0, site.1));
    coeff_phases(k.a, k.b, k.c)
}

/// `[ΦXΠ]_{ij}` without its own `(i, j)` contribution.
fn quad_cross(s: &WmmseQuadScenario, xm: &CMat, (i, j): (usize, usize)) -> C64 {
    let row = s.phi.as_mat().row(i) * xm;
    let full = (row * s.pi_m.as_mat().column(j))[(0, 0)];
    full - s.phi.as_mat()[(i, i)] * xm[(i, j)] * s.pi_m.as_mat()[(j, j)]
}

pub fn closed_phase_wmmse(s: &WmmseQuadScenario, x: &PhaseMat, site: (usize, usize)) -> Result<(f64, f64)> {
    if x.rows() != s.rows() || x.cols() != s.cols() || site.0 >= x.rows() || site.1 >= x.cols() {
        return Err(Error::DimensionMismatch(format!("site {:?} on {}x{}", site, x.rows(), x.cols())));
    }
    let arg = quad_cross(s, &x.x(), site) - s.b[site];
    linear_pair(arg, 1.0)
}

pub fn closed_phase_irs_wmmse(s: &WmmseQuadScenario, lam: &PhaseMat, i: usize) -> Result<(f64, f64)> {
    if !s.is_square() || lam.rows() != s.rows() || lam.cols() != 1 || i >= lam.rows() {
        return Err(Error::DimensionMismatch(format!("element {i} of a {}x{} layout", lam.rows(), lam.cols())));
    }
    let arg = quad_cross(s, &lam.diag_x(), (i, i)) - s.b[(i, i)];
    linear_pair(arg, 1.0)
}

pub fn irs_scratch(s: &PassiveIrsScenario, lam: &PhaseMat, i: usize) -> Result<IrsScratch> {
    check_irs(s, lam, i)?;
    let xs = unit_column(lam);
    irs_scratch_from(s, &s.whitened(&xs), xs[i], i, true)
}

fn check_irs(s: &PassiveIrsScenario, lam: &PhaseMat, i: usize) -> Result<()> {
    if lam.rows() != s.k() || lam.cols() != 1 || i >= s.k() {
        return Err(Error::DimensionMismatch(format!("element {i} of a {}x{} layout", lam.rows(), lam.cols())));
    }
    Ok(())
}

/// IRS intermediates from the current whitened channel. The `Φ^{-1}`
/// quantities are only formed when `with_inverse` is set.
pub(crate) fn irs_scratch_from(
    s: &PassiveIrsScenario,
    htil: &CMat,
    x: C64,
    i: usize,
    with_inverse: bool,
) -> Result<IrsScratch> {
    let nr = s.n_r();
    let h1 = s.w1.column(i).clone_owned();
    let h2 = s.h2.row(i).clone_owned();
    let gamma_i = &h1 * &h2;
    let m_i_mat = htil - &gamma_i * x;
    let phi_i =
        numkernel::hermitize(&(&m_i_mat * m_i_mat.adjoint() + &gamma_i * gamma_i.adjoint() + numkernel::identity(nr)))?
            .into_inner();
    let cross = &m_i_mat * gamma_i.adjoint();
    let dec = numkernel::svd(&cross)?;
    let s0 = dec.s.first().cloned().unwrap_or(0.0);
    if s0 <= VANISHING * (1.0 + m_i_mat.norm() * gamma_i.norm()) {
        return Err(Error::Degenerate("element has no effect"));
    }
    let v_i: CVec = dec.u.column(0) * c(s0, 0.0);
    let u_i: CVec = dec.v.column(0).clone_owned();
    let psi_i = &phi_i + &v_i * v_i.adjoint() + &u_i * u_i.adjoint();
    let psi_inv = numkernel::inv_hpd(&psi_i)?;
    let a2_i = v_i.dotc(&(&psi_inv * &u_i));
    let nan = c(f64::NAN, 0.0);
    let mut out = IrsScratch {
        gamma_i,
        m_i_mat,
        phi_i,
        v_i,
        u_i,
        psi_i,
        a2_i,
        a_i: nan,
        b_i: nan,
        beta_i: nan,
        d_i: nan,
        s_vv: nan,
        s_uu: nan,
        s_vu: nan,
    };
    if with_inverse {
        let p = numkernel::inv_hpd(&out.phi_i)?;
        let pv = &p * &out.v_i;
        let pu = &p * &out.u_i;
        out.a_i = out.v_i.dotc(&pv);
        out.b_i = out.u_i.dotc(&pu);
        out.beta_i = out.v_i.dotc(&pu);
        out.s_vv = pv.dotc(&pv);
        out.s_uu = pu.dotc(&pu);
        out.s_vu = pv.dotc(&pu);
        let bx = out.beta_i * x;
        out.d_i = C64::ONE + out.beta_i * out.beta_i.conj() - out.a_i * out.b_i + bx + bx.conj();
    }
    Ok(out)
}

fn irs_mse_coeffs(k: &IrsScratch) -> CmCoeffs {
    let (a, b) = (k.a_i.re, k.b_i.re);
    let bc = k.beta_i.conj();
    let mix = k.s_vv * b + k.s_uu * a;
    CmCoeffs {
        a: k.s_vu,
        b: bc * bc * k.s_vu - bc * mix + k.s_vu.conj() * (a * b),
        c: bc * k.s_vu * 2.0 - mix,
        d: k.d_i.re * k.d_i.re,
    }
}

pub fn closed_phase_irs_capacity(s: &PassiveIrsScenario, lam: &PhaseMat, i: usize) -> Result<(f64, f64)> {
    check_irs(s, lam, i)?;
    let xs = unit_column(lam);
    let k = irs_scratch_from(s, &s.whitened(&xs), xs[i], i, false)?;
    linear_pair(k.a2_i.conj(), 1.0)
}

pub fn closed_phase_irs_mse(s: &PassiveIrsScenario, lam: &PhaseMat, i: usize) -> Result<(f64, f64)> {
    let k = irs_scratch(s, lam, i)?;
    let cf = irs_mse_coeffs(&k);
    coeff_phases(cf.a, cf.b, cf.c)
}

/// Coefficients `(A, B, C, d)` at a site with `g = σ·Im{AX+BX*+C}/d`.
pub fn closed_coeffs(problem: &CmProblem, x: &PhaseMat, site: (usize, usize)) -> Result<CmCoeffs> {
    problem.check(x)?;
    closed_site(problem, x, site, None).map(|(k, _)| k)
}

/// Both candidate phases from the coefficient path.
pub fn closed_phase(problem: &CmProblem, x: &PhaseMat, site: (usize, usize)) -> Result<(f64, f64)> {
    problem.check(x)?;
    closed_site(problem, x, site, None).map(|(_, p)| p)
}

/// Coefficients and candidates; IRS callers may pass the current whitened
/// channel to skip rebuilding it.
pub(crate) fn closed_site(
    problem: &CmProblem,
    x: &PhaseMat,
    site: (usize, usize),
    htil: Option<&CMat>,
) -> Result<(CmCoeffs, (f64, f64))> {
    let (i, j) = site;
    if i >= x.rows() || j >= x.cols() {
        return Err(Error::InvalidInput(format!("site ({i},{j}) out of range")));
    }
    let xij = x.entry(i, j);
    match problem {
        CmProblem::HybridCapacity(s) => {
            let h = hybrid_scratch_mat(s, &x.x(), site)?;
            Ok((hybrid_capacity_coeffs(&h, xij), linear_pair(h.e, h.a.norm())?))
        }
        CmProblem::HybridMse(s) => {
            let h = hybrid_scratch_mat(s, &x.x(), site)?;
            let k = hybrid_mse_coeffs(&h, xij);
            Ok((k, coeff_phases(k.a, k.b, k.c)?))
        }
        CmProblem::Wmmse(s) => {
            let arg = quad_cross(s, &x.x(), site) - s.b[site];
            let k =
                CmCoeffs { a: arg.conj(), b: C64::ZERO, c: s.phi.as_mat()[(i, i)] * s.pi_m.as_mat()[(j, j)], d: 1.0 };
            Ok((k, linear_pair(arg, 1.0)?))
        }
        CmProblem::IrsWmmse(s) => {
            let arg = quad_cross(s, &x.diag_x(), (i, i)) - s.b[(i, i)];
            let k =
                CmCoeffs { a: arg.conj(), b: C64::ZERO, c: s.phi.as_mat()[(i, i)] * s.pi_m.as_mat()[(i, i)], d: 1.0 };
            Ok((k, linear_pair(arg, 1.0)?))
        }
        CmProblem::IrsCapacity(s) | CmProblem::IrsMse(s) => {
            let owned;
            let h = match htil {
                Some(h) => h,
                None => {
                    owned = s.whitened(&unit_column(x));
                    &owned
                }
            };
            let mse = matches!(problem, CmProblem::IrsMse(_));
            let k = irs_scratch_from(s, h, xij, i, mse)?;
            if mse {
                let cf = irs_mse_coeffs(&k);
                Ok((cf, coeff_phases(cf.a, cf.b, cf.c)?))
            } else {
                let cf = CmCoeffs { a: k.a2_i, b: C64::ZERO, c: C64::ZERO, d: 1.0 };
                Ok((cf, linear_pair(k.a2_i.conj(), 1.0)?))
            }
        }
    }
}
