//! Dense complex linear algebra shared by every solver.
//!
//! All tolerances are fixed constants of this module. Callers never pass a
//! tolerance in, so the numeric contract can be tested in isolation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RVec = DVector<f64>;

/// Relative skew allowed by [`HermitianMat`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative negative eigenvalue allowed by [`PsdMat`].
pub const PSD_TOL: f64 = 1e-10;
/// Largest 1-norm condition number accepted by [`inv`].
pub const COND_LIMIT: f64 = 1e12;
/// Smallest denominator magnitude accepted by [`sherman_morrison_inv`].
pub const SM_DENOM_TOL: f64 = 1e-12;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 0;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{jθ}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(d: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(d))
}

pub fn real_diag(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { C64::ZERO })
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(a: &CMat, what: &'static str) -> Result<()> {
    if is_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(a: &CMat) -> Result<usize> {
    if a.nrows() == a.ncols() && a.nrows() > 0 {
        Ok(a.nrows())
    } else {
        Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() })
    }
}

/// Induced 1-norm (max column sum).
pub fn norm1(a: &CMat) -> f64 {
    a.column_iter().map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Structured wrappers
// ---------------------------------------------------------------------------

/// Square matrix equal to its conjugate transpose up to [`HERMITIAN_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMat(CMat);

impl HermitianMat {
    pub fn new(a: CMat) -> Result<Self> {
        ensure_square(&a)?;
        ensure_finite(&a, "HermitianMat")?;
        let skew = (&a - a.adjoint()).norm() / a.norm().max(1.0);
        if skew > HERMITIAN_TOL {
            return Err(Error::NotHermitian { skew });
        }
        Ok(Self(a))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }
}

/// Hermitian matrix whose spectrum is non-negative up to [`PSD_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMat(HermitianMat);

impl PsdMat {
    pub fn new(h: HermitianMat) -> Result<Self> {
        let (w, _) = eigh(&h);
        let max = w.iter().cloned().fold(0.0, f64::max);
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { min_eig: min });
        }
        Ok(Self(h))
    }

    /// `a·a^H`, PSD by construction.
    pub fn gram(a: &CMat) -> Self {
        let g = a * a.adjoint();
        Self(HermitianMat(hermitize_raw(&g)))
    }

    /// `σ²·I`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(HermitianMat(identity(n) * c(s, 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_herm(&self) -> &HermitianMat {
        &self.0
    }

    pub fn as_mat(&self) -> &CMat {
        self.0.as_mat()
    }
}

fn hermitize_raw(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// `(a + a^H)/2`.
pub fn hermitize(a: &CMat) -> Result<HermitianMat> {
    ensure_square(a)?;
    ensure_finite(a, "hermitize")?;
    Ok(HermitianMat(hermitize_raw(a)))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &HermitianMat) -> (RVec, CMat) {
    let eig = SymmetricEigen::new(a.as_mat().clone());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let w = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut v = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &eig.eigenvectors.column(i));
    }
    (w, v)
}

/// Hermitian PSD square root via eigen-decomposition.
pub fn psd_sqrt(p: &PsdMat) -> HermitianMat {
    let (w, v) = eigh(p.as_herm());
    let s: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    HermitianMat(hermitize_raw(&(&v * real_diag(&s) * v.adjoint())))
}

/// `p^{-1/2}` for positive definite `p`.
pub fn psd_inv_sqrt(p: &PsdMat) -> Result<HermitianMat> {
    let (w, v) = eigh(p.as_herm());
    let max = w.iter().cloned().fold(0.0, f64::max);
    if w[0] <= max / COND_LIMIT {
        return Err(Error::IllConditioned { cond: max / w[0].max(0.0) });
    }
    let s: Vec<f64> = w.iter().map(|&x| 1.0 / x.sqrt()).collect();
    Ok(HermitianMat(hermitize_raw(&(&v * real_diag(&s) * v.adjoint()))))
}

/// General inverse guarded by a 1-norm condition estimate.
pub fn inv(a: &CMat) -> Result<CMat> {
    ensure_square(a)?;
    ensure_finite(a, "inv")?;
    let ai = a.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let cond = norm1(a) * norm1(&ai);
    if !cond.is_finite() || cond >= COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }
    Ok(ai)
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// The complex square root never fails, so a negative pivot shows up as an
/// imaginary diagonal entry of the factor; that is rejected here.
pub fn cholesky(a: &CMat) -> Result<Cholesky<C64, Dyn>> {
    let n = ensure_square(a)?;
    let ch = Cholesky::new(a.clone()).ok_or(Error::NotHpd)?;
    let l = ch.l_dirty();
    for i in 0..n {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.re.is_finite()) || d.im.abs() > 1e-10 * d.re {
            return Err(Error::NotHpd);
        }
    }
    Ok(ch)
}

/// Natural-log determinant through a Cholesky factorization.
pub fn logdet_hpd(a: &HermitianMat) -> Result<f64> {
    let ch = cholesky(a.as_mat())?;
    let l = ch.l_dirty();
    let acc: f64 = (0..a.dim()).map(|i| l[(i, i)].re.ln()).sum();
    Ok(2.0 * acc)
}

/// Inverse of a Hermitian positive definite matrix, returned Hermitian.
pub fn inv_hpd(a: &CMat) -> Result<CMat> {
    let ch = cholesky(a)?;
    Ok(hermitize_raw(&ch.inverse()))
}

/// Thin singular value decomposition.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// `a = U·diag(s)·V^H`, singular values descending.
pub fn svd(a: &CMat) -> Result<Svd> {
    ensure_finite(a, "svd")?;
    let dec = nalgebra::SVD::try_new(a.clone(), true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::NonFinite("svd did not converge"))?;
    let u0 = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested V^H");
    let r = dec.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let mut u = CMat::zeros(a.nrows(), r);
    let mut v = CMat::zeros(a.ncols(), r);
    let mut s = Vec::with_capacity(r);
    for (k, &i) in order.iter().enumerate() {
        u.set_column(k, &u0.column(i));
        v.set_column(k, &vt.row(i).adjoint());
        s.push(dec.singular_values[i]);
    }
    Ok(Svd { u, s, v })
}

/// `(M + u·v^H)^{-1}` from `M^{-1}`.
pub fn sherman_morrison_inv(m_inv: &CMat, u: &CVec, v: &CVec) -> Result<CMat> {
    let n = ensure_square(m_inv)?;
    if u.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rank-one update vectors of length {}/{} against {n}x{n}",
            u.len(),
            v.len()
        )));
    }
    let mu = m_inv * u;
    let vm = v.adjoint() * m_inv;
    let denom = C64::ONE + (v.adjoint() * &mu)[(0, 0)];
    if denom.norm() <= SM_DENOM_TOL {
        return Err(Error::SingularUpdate { denom: denom.norm() });
    }
    Ok(m_inv - (mu * vm) / denom)
}

/// Real trace of a matrix assumed Hermitian.
pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: usize, cols: usize, v: &[(f64, f64)]) -> CMat {
        CMat::from_row_iterator(rows, cols, v.iter().map(|&(r, i)| c(r, i)))
    }

    #[test]
    fn hermitize_identity_and_skew() {
        let h = hermitize(&identity(3)).unwrap();
        assert_eq!(h.as_mat(), &identity(3));
        let a = mat(2, 2, &[(0., 0.), (0., 2.), (0., 0.), (0., 0.)]);
        let h = hermitize(&a).unwrap();
        let want = mat(2, 2, &[(0., 0.), (0., 1.), (0., -1.), (0., 0.)]);
        assert!((h.as_mat() - want).norm() < 1e-15);
        assert!(hermitize(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn psd_sqrt_diagonal() {
        let p = PsdMat::new(HermitianMat::new(real_diag(&[4.0, 9.0])).unwrap()).unwrap();
        let s = psd_sqrt(&p);
        assert!((s.as_mat() - real_diag(&[2.0, 3.0])).norm() < 1e-12);
        let s = psd_sqrt(&PsdMat::identity(3));
        assert!((s.as_mat() - identity(3)).norm() < 1e-12);
    }

    #[test]
    fn psd_rejects_indefinite() {
        let h = HermitianMat::new(real_diag(&[1.0, -0.5])).unwrap();
        assert!(matches!(PsdMat::new(h), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn inv_diagonal_and_singular() {
        let ai = inv(&real_diag(&[2.0, 4.0])).unwrap();
        assert!((ai - real_diag(&[0.5, 0.25])).norm() < 1e-15);
        assert!((inv(&identity(4)).unwrap() - identity(4)).norm() < 1e-15);
        assert!(inv(&real_diag(&[1.0, 1e-14])).is_err());
        assert!(inv(&CMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn logdet_examples() {
        assert_abs_diff_eq!(logdet_hpd(&HermitianMat::identity(4)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let d = HermitianMat::new(real_diag(&[e, e * e])).unwrap();
        assert_abs_diff_eq!(logdet_hpd(&d).unwrap(), 3.0, epsilon = 1e-14);
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let a = HermitianMat::new(identity(3) + &v * v.adjoint()).unwrap();
        assert_abs_diff_eq!(logdet_hpd(&a).unwrap(), 4f64.ln(), epsilon = 1e-14);
        let neg = HermitianMat::new(real_diag(&[1.0, -1.0])).unwrap();
        assert_eq!(logdet_hpd(&neg), Err(Error::NotHpd));
    }

    #[test]
    fn svd_sorted_and_rank_one() {
        let d = svd(&real_diag(&[1.0, 3.0])).unwrap();
        assert_abs_diff_eq!(d.s[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.s[1], 1.0, epsilon = 1e-14);
        let u = CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let v = CVec::from_vec(vec![c(0.0, 1.0), c(0.0, 0.0)]);
        let d = svd(&(&u * v.adjoint())).unwrap();
        assert_abs_diff_eq!(d.s[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.s[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sherman_morrison_examples() {
        let e1 = CVec::from_vec(vec![C64::ONE, C64::ZERO, C64::ZERO]);
        let out = sherman_morrison_inv(&identity(3), &e1, &e1).unwrap();
        assert!((out - real_diag(&[0.5, 1.0, 1.0])).norm() < 1e-15);
        let m = mat(2, 2, &[(2., 1.), (0., 0.), (1., 0.), (3., -1.)]);
        let out = sherman_morrison_inv(&m, &CVec::zeros(2), &CVec::from_element(2, C64::ONE)).unwrap();
        assert_eq!(out, m);
        let neg = CVec::from_vec(vec![-C64::ONE, C64::ZERO, C64::ZERO]);
        assert!(matches!(sherman_morrison_inv(&identity(3), &neg, &e1), Err(Error::SingularUpdate { .. })));
    }
}
