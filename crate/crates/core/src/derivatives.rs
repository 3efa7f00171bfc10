//! Derivative rules for diagonal-structured and constant-modulus matrix
//! variables, plus the central finite-difference checker that serves as the
//! independent oracle for all of them.
//!
//! Diagonal rules return the pair `(∂f/∂Λ, ∂f/∂Λ*)` restricted to the
//! diagonal. Phase rules return `∂f/∂θ_{ij}` for `X_{ij} = e^{jθ_{ij}}`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkernel::{self, cis, CMat, CVec, HermitianMat, PsdMat, C64};

/// Central-difference step used by [`fd_check`].
pub const FD_STEP: f64 = 1e-5;

/// Wrap a phase into `[0, 2π)`.
pub fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

/// Diagonal matrix variable stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagVar(CVec);

impl DiagVar {
    pub fn new(d: Vec<C64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidInput("empty diagonal".into()));
        }
        if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("DiagVar"));
        }
        Ok(Self(CVec::from_vec(d)))
    }

    pub fn from_real(d: &[f64]) -> Result<Self> {
        Self::new(d.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(k: usize) -> Self {
        Self(CVec::zeros(k))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_vec(&self) -> &CVec {
        &self.0
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn to_mat(&self) -> CMat {
        CMat::from_diagonal(&self.0)
    }

    /// `Tr(ΛΛ^H)`.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr(ΛΛ^H) ≤ k(1 + 1e-9)`.
    pub fn within_trace_bound(&self) -> bool {
        self.energy() <= self.k() as f64 * (1.0 + 1e-9)
    }

    /// `|d_i| ≤ 1 + 1e-9` for all i.
    pub fn within_element_bound(&self) -> bool {
        self.0.iter().all(|z| z.norm() <= 1.0 + 1e-9)
    }

    /// `[Re d; Im d]`.
    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).chain(self.0.iter().map(|z| z.im)).collect()
    }

    pub fn from_real_parts(v: &[f64]) -> Result<Self> {
        let k = v.len() / 2;
        Self::new((0..k).map(|i| C64::new(v[i], v[k + i])).collect())
    }
}

/// Real phase matrix backing a constant-modulus variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMat {
    theta: DMatrix<f64>,
}

impl PhaseMat {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() == 0 || theta.ncols() == 0 {
            return Err(Error::InvalidInput("empty phase matrix".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("PhaseMat"));
        }
        Ok(Self { theta: theta.map(wrap_phase) })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { theta: DMatrix::zeros(rows, cols) }
    }

    /// Column of `k` phases, the layout used for diagonal (IRS) variables.
    pub fn column(phases: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(phases.len(), 1, phases))
    }

    pub fn rows(&self) -> usize {
        self.theta.nrows()
    }

    pub fn cols(&self) -> usize {
        self.theta.ncols()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, t: f64) {
        self.theta[(i, j)] = wrap_phase(t);
    }

    /// Copy with one entry replaced.
    pub fn with(&self, i: usize, j: usize, t: f64) -> Self {
        let mut out = self.clone();
        out.set(i, j, t);
        out
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        cis(self.theta[(i, j)])
    }

    /// `X` with `X_{ij} = e^{jθ_{ij}}`.
    pub fn x(&self) -> CMat {
        self.theta.map(cis)
    }

    /// Diagonal matrix built from a column layout.
    pub fn diag_x(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.len(), self.theta.iter().map(|&t| cis(t))))
    }

    /// Row-major flattening.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                v.push(self.theta[(i, j)]);
            }
        }
        v
    }

    pub fn from_vec(rows: usize, cols: usize, v: &[f64]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} phases for a {rows}x{cols} matrix", v.len())));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, v))
    }

    /// Site list in row-major sweep order.
    pub fn sites(&self) -> Vec<(usize, usize)> {
        (0..self.rows()).flat_map(|i| (0..self.cols()).map(move |j| (i, j))).collect()
    }
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// `(Diag{∂f/∂Λ}, Diag{∂f/∂Λ*})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGrad {
    pub wrt_var: CVec,
    pub wrt_conj: CVec,
}

impl DiagGrad {
    pub fn k(&self) -> usize {
        self.wrt_var.len()
    }

    /// Real Jacobian over `[Re d; Im d]` for `(Re f, Im f)`.
    ///
    /// With `∂f/∂x = ∂f/∂d + ∂f/∂d*` and `∂f/∂y = j(∂f/∂d − ∂f/∂d*)`, which
    /// is valid whether or not f is real valued.
    pub fn real_jacobian(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.k();
        let mut re = vec![0.0; 2 * k];
        let mut im = vec![0.0; 2 * k];
        for i in 0..k {
            let dx = self.wrt_var[i] + self.wrt_conj[i];
            let dy = C64::i() * (self.wrt_var[i] - self.wrt_conj[i]);
            re[i] = dx.re;
            im[i] = dx.im;
            re[k + i] = dy.re;
            im[k + i] = dy.im;
        }
        (re, im)
    }
}

/// `∂f/∂θ` for every entry of a phase matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrad {
    pub g: DMatrix<f64>,
}

impl PhaseGrad {
    /// Row-major flattening, matching [`PhaseMat::to_vec`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.g.len());
        for i in 0..self.g.nrows() {
            for j in 0..self.g.ncols() {
                v.push(self.g[(i, j)]);
            }
        }
        v
    }
}

fn check_square(m: &CMat, k: usize, what: &str) -> Result<()> {
    if m.nrows() != k || m.ncols() != k {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}, expected {k}x{k}", m.nrows(), m.ncols())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Diagonal-structure rules
// ---------------------------------------------------------------------------

/// `f = Tr(Λ^H M) + Tr(Λ M^H)`.
pub fn diag_grad_trace_linear(m: &CMat) -> Result<DiagGrad> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let d = m.diagonal();
    Ok(DiagGrad { wrt_var: d.map(|z| z.conj()), wrt_conj: d })
}

/// `f = Tr(Λ^H W Λ)`.
pub fn diag_grad_trace_quadratic(w: &HermitianMat, lam: &DiagVar) -> Result<DiagGrad> {
    check_square(w.as_mat(), lam.k(), "W")?;
    let wl = w.as_mat() * lam.to_mat();
    let lw = lam.to_mat().adjoint() * w.as_mat();
    Ok(DiagGrad { wrt_var: lw.diagonal(), wrt_conj: wl.diagonal() })
}

/// `f = Tr((I + ΦΛ)^{-1})`, using the un-symmetrized `−Diag{(I+ΦΛ)^{-2}Φ}`.
pub fn diag_grad_trace_inverse(phi: &PsdMat, lam: &DiagVar) -> Result<DiagGrad> {
    let k = lam.k();
    check_square(phi.as_mat(), k, "Φ")?;
    let ai = numkernel::inv(&(numkernel::identity(k) + phi.as_mat() * lam.to_mat()))?;
    let d = -(&ai * &ai * phi.as_mat()).diagonal();
    Ok(DiagGrad { wrt_var: d, wrt_conj: CVec::zeros(k) })
}

/// `f = log|I + ΦΛ|`, using the un-symmetrized `Diag{(I+ΦΛ)^{-1}Φ}`.
pub fn diag_grad_logdet(phi: &PsdMat, lam: &DiagVar) -> Result<DiagGrad> {
    let k = lam.k();
    check_square(phi.as_mat(), k, "Φ")?;
    let ai = numkernel::inv(&(numkernel::identity(k) + phi.as_mat() * lam.to_mat()))?;
    let d = (ai * phi.as_mat()).diagonal();
    Ok(DiagGrad { wrt_var: d, wrt_conj: CVec::zeros(k) })
}

/// Symmetrized `−Diag{Φ^{1/2}(I+Φ^{1/2}ΛΦ^{1/2})^{-2}Φ^{1/2}}`; equal to the
/// un-symmetrized form only for real Λ.
pub fn diag_grad_trace_inverse_sym(phi: &PsdMat, lam: &DiagVar) -> Result<CVec> {
    let k = lam.k();
    let s = numkernel::psd_sqrt(phi);
    let s = s.as_mat();
    let ai = numkernel::inv(&(numkernel::identity(k) + s * lam.to_mat() * s))?;
    Ok(-(s * &ai * &ai * s).diagonal())
}

/// Symmetrized `Diag{Φ^{1/2}(I+Φ^{1/2}ΛΦ^{1/2})^{-1}Φ^{1/2}}`.
pub fn diag_grad_logdet_sym(phi: &PsdMat, lam: &DiagVar) -> Result<CVec> {
    let k = lam.k();
    let s = numkernel::psd_sqrt(phi);
    let s = s.as_mat();
    let ai = numkernel::inv(&(numkernel::identity(k) + s * lam.to_mat() * s))?;
    Ok((s * ai * s).diagonal())
}

/// Objective values for the four diagonal families; the last two are complex
/// for complex Λ.
pub mod diag_objective {
    use super::*;

    pub fn trace_linear(m: &CMat, lam: &DiagVar) -> f64 {
        let l = lam.to_mat();
        ((l.adjoint() * m).trace() + (l * m.adjoint()).trace()).re
    }

    pub fn trace_quadratic(w: &HermitianMat, lam: &DiagVar) -> f64 {
        let l = lam.to_mat();
        (l.adjoint() * w.as_mat() * l).trace().re
    }

    pub fn trace_inverse(phi: &PsdMat, lam: &DiagVar) -> Result<C64> {
        let k = lam.k();
        Ok(numkernel::inv(&(numkernel::identity(k) + phi.as_mat() * lam.to_mat()))?.trace())
    }

    /// Principal complex logarithm of the determinant.
    pub fn logdet(phi: &PsdMat, lam: &DiagVar) -> C64 {
        let k = lam.k();
        (numkernel::identity(k) + phi.as_mat() * lam.to_mat()).determinant().ln()
    }
}

// ---------------------------------------------------------------------------
// Constant-modulus (phase) rules
// ---------------------------------------------------------------------------

fn phase_from_kernel(p: &CMat, x: &CMat, scale: f64) -> PhaseGrad {
    PhaseGrad { g: DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| scale * (p[(i, j)].conj() * x[(i, j)]).im) }
}

fn check_shape(a: &CMat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if a.nrows() != rows || a.ncols() != cols {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}, expected {rows}x{cols}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// `f = Tr(B^H X) + Tr(B X^H)`: `g = −2 Im{B*_{ij} X_{ij}}`.
pub fn phase_grad_trace_linear(b: &CMat, x: &PhaseMat) -> Result<PhaseGrad> {
    check_shape(b, x.rows(), x.cols(), "B")?;
    Ok(phase_from_kernel(b, &x.x(), -2.0))
}

/// `f = Tr(XΠX^HΦ)`: `g = −2 Im{(ΦXΠ)*_{ij} X_{ij}}`.
pub fn phase_grad_trace_quadratic(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<PhaseGrad> {
    check_square(phi.as_mat(), x.rows(), "Φ")?;
    check_square(pi_m.as_mat(), x.cols(), "Π")?;
    let xm = x.x();
    let p = phi.as_mat() * &xm * pi_m.as_mat();
    Ok(phase_from_kernel(&p, &xm, -2.0))
}

fn inner_inverse(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<(CMat, CMat, CMat)> {
    check_square(pi_m.as_mat(), x.rows(), "Π")?;
    check_square(phi.as_mat(), x.cols(), "Φ")?;
    let xm = x.x();
    let px = pi_m.as_mat() * &xm;
    let inner = phi.as_mat() + xm.adjoint() * &px;
    Ok((xm, px, inner))
}

/// `f = Tr((Φ + X^HΠX)^{-1})`: `g = 2 Im{(ΠX(Φ+X^HΠX)^{-2})*_{ij} X_{ij}}`.
pub fn phase_grad_trace_inverse(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<PhaseGrad> {
    let (xm, px, inner) = inner_inverse(phi, pi_m, x)?;
    let mi = numkernel::inv(&inner)?;
    Ok(phase_from_kernel(&(px * &mi * &mi), &xm, 2.0))
}

/// `f = log|Φ + X^HΠX|`: `g = −2 Im{(ΠX(Φ+X^HΠX)^{-1})*_{ij} X_{ij}}`.
pub fn phase_grad_logdet(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<PhaseGrad> {
    let (xm, px, inner) = inner_inverse(phi, pi_m, x)?;
    let mi = numkernel::inv_hpd(&inner)?;
    Ok(phase_from_kernel(&(px * mi), &xm, -2.0))
}

/// Objective values for the four constant-modulus families.
pub mod phase_objective {
    use super::*;

    pub fn trace_linear(b: &CMat, x: &PhaseMat) -> f64 {
        let xm = x.x();
        2.0 * (b.adjoint() * xm).trace().re
    }

    pub fn trace_quadratic(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> f64 {
        let xm = x.x();
        (&xm * pi_m.as_mat() * xm.adjoint() * phi.as_mat()).trace().re
    }

    pub fn trace_inverse(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<f64> {
        let (_, _, inner) = inner_inverse(phi, pi_m, x)?;
        Ok(numkernel::trace_re(&numkernel::inv(&inner)?))
    }

    pub fn logdet(phi: &HermitianMat, pi_m: &HermitianMat, x: &PhaseMat) -> Result<f64> {
        let (_, _, inner) = inner_inverse(phi, pi_m, x)?;
        numkernel::logdet_hpd(&numkernel::hermitize(&inner)?)
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Central finite-difference gradient with step [`FD_STEP`].
pub fn fd_gradient<F>(f: F, at: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = at.to_vec();
    let mut out = Vec::with_capacity(at.len());
    for k in 0..at.len() {
        let x0 = p[k];
        p[k] = x0 + FD_STEP;
        let fp = f(&p);
        p[k] = x0 - FD_STEP;
        let fm = f(&p);
        p[k] = x0;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite("fd_check objective"));
        }
        out.push((fp - fm) / (2.0 * FD_STEP));
    }
    Ok(out)
}

/// Max over coordinates of `|fd − analytic| / max(1, |fd|)`.
pub fn fd_check<F>(f: F, at: &[f64], analytic: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if at.len() != analytic.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinates vs {} analytic entries",
            at.len(),
            analytic.len()
        )));
    }
    let fd = fd_gradient(f, at)?;
    Ok(fd.iter().zip(analytic).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{c, real_diag};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!(wrap_phase(-1e-300) < TAU);
        assert!((wrap_phase(7.0) - (7.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn trace_linear_examples() {
        let g = diag_grad_trace_linear(&numkernel::identity(2)).unwrap();
        assert!(g.wrt_var.iter().all(|z| *z == C64::ONE));
        assert!(g.wrt_conj.iter().all(|z| *z == C64::ONE));
        let m = numkernel::diag(&[c(0.0, 1.0), c(0.0, 2.0)]);
        let g = diag_grad_trace_linear(&m).unwrap();
        assert_eq!(g.wrt_var.as_slice(), &[c(0.0, -1.0), c(0.0, -2.0)]);
        assert_eq!(g.wrt_conj.as_slice(), &[c(0.0, 1.0), c(0.0, 2.0)]);
        assert!(diag_grad_trace_linear(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn trace_quadratic_examples() {
        let d = vec![c(1.0, 2.0), c(-0.5, 0.3)];
        let lam = DiagVar::new(d.clone()).unwrap();
        let g = diag_grad_trace_quadratic(&HermitianMat::identity(2), &lam).unwrap();
        assert_eq!(g.wrt_conj.as_slice(), d.as_slice());
        let conj: Vec<C64> = d.iter().map(|z| z.conj()).collect();
        assert_eq!(g.wrt_var.as_slice(), conj.as_slice());
        let g = diag_grad_trace_quadratic(&HermitianMat::identity(2), &DiagVar::zeros(2)).unwrap();
        assert!(g.wrt_var.iter().chain(g.wrt_conj.iter()).all(|z| *z == C64::ZERO));
    }

    #[test]
    fn trace_inverse_and_logdet_scalar_cases() {
        let phi = PsdMat::new(HermitianMat::new(real_diag(&[2.0, 3.0])).unwrap()).unwrap();
        let g = diag_grad_trace_inverse(&phi, &DiagVar::zeros(2)).unwrap();
        assert!((g.wrt_var[0] + 2.0).norm() < 1e-15 && (g.wrt_var[1] + 3.0).norm() < 1e-15);
        let g = diag_grad_logdet(&phi, &DiagVar::zeros(2)).unwrap();
        assert!((g.wrt_var[0] - 2.0).norm() < 1e-15 && (g.wrt_var[1] - 3.0).norm() < 1e-15);

        let lam = DiagVar::from_real(&[0.5, 2.0]).unwrap();
        let id = PsdMat::identity(2);
        let ti = diag_grad_trace_inverse(&id, &lam).unwrap();
        let ld = diag_grad_logdet(&id, &lam).unwrap();
        for (k, l) in [0.5f64, 2.0].iter().enumerate() {
            assert!((ti.wrt_var[k].re + 1.0 / (1.0 + l).powi(2)).abs() < 1e-14);
            assert!((ld.wrt_var[k].re - 1.0 / (1.0 + l)).abs() < 1e-14);
        }
        assert!(ti.wrt_conj.iter().all(|z| *z == C64::ZERO));
    }

    #[test]
    fn phase_linear_examples() {
        let b = CMat::from_element(2, 2, c(1.5, 0.0));
        let g = phase_grad_trace_linear(&b, &PhaseMat::zeros(2, 2)).unwrap();
        assert!(g.g.iter().all(|v| v.abs() < 1e-15));
        let x = PhaseMat::new(DMatrix::from_element(1, 1, FRAC_PI_2)).unwrap();
        let g = phase_grad_trace_linear(&CMat::from_element(1, 1, C64::ONE), &x).unwrap();
        assert!((g.g[(0, 0)] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_by_one_phase_rules_vanish() {
        let x = PhaseMat::new(DMatrix::from_element(1, 1, 1.234)).unwrap();
        let phi = HermitianMat::new(real_diag(&[2.0])).unwrap();
        let pi_m = HermitianMat::new(real_diag(&[3.0])).unwrap();
        for g in [
            phase_grad_trace_quadratic(&phi, &pi_m, &x).unwrap(),
            phase_grad_trace_inverse(&phi, &pi_m, &x).unwrap(),
            phase_grad_logdet(&phi, &pi_m, &x).unwrap(),
        ] {
            assert!(g.g[(0, 0)].abs() < 1e-15);
        }
    }

    #[test]
    fn fd_check_trivial() {
        let e = fd_check(|v: &[f64]| v[0] * v[0], &[3.0], &[6.0]).unwrap();
        assert!(e <= 1e-10);
        let e = fd_check(|_: &[f64]| 4.0, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(e, 0.0);
        assert!(fd_check(|v: &[f64]| v[0].ln(), &[0.0], &[0.0]).is_err());
    }
}
