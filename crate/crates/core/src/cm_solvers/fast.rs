//! Incremental kernel evaluation for the sweep: after `begin_site` every
//! probe only touches cached intermediates, never a full inversion.

use super::{unit_column, CmProblem, HybridScenario, PassiveIrsScenario, WmmseQuadScenario};
use crate::derivatives::PhaseMat;
use crate::error::{Error, Result};
use crate::numkernel::{self, cis, CMat, CVec, C64, SM_DENOM_TOL};

pub(crate) trait SiteKernel {
    /// Rebuild every cache from `x`.
    fn refresh(&mut self, x: &PhaseMat) -> Result<()>;
    fn begin_site(&mut self, site: (usize, usize)) -> Result<()>;
    /// Kernel with the current site's phase set to `theta`.
    fn kernel(&self, theta: f64) -> Result<C64>;
    /// Write `theta` into the current site.
    fn commit(&mut self, theta: f64) -> Result<()>;
}

pub(crate) fn build<'a>(problem: &'a CmProblem, x: &PhaseMat) -> Result<Box<dyn SiteKernel + 'a>> {
    let mut ev: Box<dyn SiteKernel + 'a> = match problem {
        CmProblem::HybridCapacity(s) => Box::new(HybridEval::new(s, false)),
        CmProblem::HybridMse(s) => Box::new(HybridEval::new(s, true)),
        CmProblem::Wmmse(s) => Box::new(QuadEval::new(s, false)),
        CmProblem::IrsWmmse(s) => Box::new(QuadEval::new(s, true)),
        CmProblem::IrsCapacity(s) => Box::new(IrsEval::new(s, false)),
        CmProblem::IrsMse(s) => Box::new(IrsEval::new(s, true)),
    };
    ev.refresh(x)?;
    Ok(ev)
}

// ---------------------------------------------------------------------------

/// Keeps `Y = ΠX` and `M = I + X^HY`; a probe at `(i, j)` moves column `j`
/// of `Y` and row/column `j` of `M`, then solves one `N_rf` system.
struct HybridEval<'a> {
    s: &'a HybridScenario,
    mse: bool,
    x: CMat,
    y: CMat,
    m: CMat,
    site: (usize, usize),
}

impl<'a> HybridEval<'a> {
    fn new(s: &'a HybridScenario, mse: bool) -> Self {
        Self { s, mse, x: CMat::zeros(0, 0), y: CMat::zeros(0, 0), m: CMat::zeros(0, 0), site: (0, 0) }
    }

    /// `(Y[:, j], M)` with the current site set to `xn`.
    fn moved(&self, xn: C64) -> (CVec, CMat) {
        let (i, j) = self.site;
        let delta = xn - self.x[(i, j)];
        let pi = self.s.pi_m.as_mat();
        let yj = self.y.column(j) + pi.column(i) * delta;
        let mut m = self.m.clone();
        for l in 0..m.nrows() {
            if l != j {
                let v = m[(l, j)] + delta * self.y[(i, l)].conj();
                m[(l, j)] = v;
                m[(j, l)] = v.conj();
            }
        }
        let mut xj = self.x.column(j).clone_owned();
        xj[i] = xn;
        m[(j, j)] = C64::new(1.0 + xj.dotc(&yj).re, 0.0);
        (yj, m)
    }
}

impl SiteKernel for HybridEval<'_> {
    fn refresh(&mut self, x: &PhaseMat) -> Result<()> {
        self.x = x.x();
        self.y = self.s.pi_m.as_mat() * &self.x;
        self.m = numkernel::hermitize(&(numkernel::identity(self.s.n_rf) + self.x.adjoint() * &self.y))?.into_inner();
        Ok(())
    }

    fn begin_site(&mut self, site: (usize, usize)) -> Result<()> {
        self.site = site;
        Ok(())
    }

    fn kernel(&self, theta: f64) -> Result<C64> {
        let (i, j) = self.site;
        let xn = cis(theta);
        let (yj, m) = self.moved(xn);
        let ch = numkernel::cholesky(&m)?;
        let mut e = CVec::zeros(m.nrows());
        e[j] = C64::ONE;
        let mut z = ch.solve(&e);
        if self.mse {
            z = ch.solve(&z);
        }
        let mut acc = C64::ZERO;
        for l in 0..m.nrows() {
            let yil = if l == j { yj[i] } else { self.y[(i, l)] };
            acc += yil * z[l];
        }
        Ok(acc.conj() * xn)
    }

    fn commit(&mut self, theta: f64) -> Result<()> {
        let (i, j) = self.site;
        let xn = cis(theta);
        let (yj, m) = self.moved(xn);
        self.y.set_column(j, &yj);
        self.m = m;
        self.x[(i, j)] = xn;
        Ok(())
    }
}

// ---------------------------------------------------------------------------

/// Keeps `Z = ΦXΠ`; the diagonal variant addresses `(i, i)`.
struct QuadEval<'a> {
    s: &'a WmmseQuadScenario,
    diagonal: bool,
    x: CMat,
    z: CMat,
    site: (usize, usize),
}

impl<'a> QuadEval<'a> {
    fn new(s: &'a WmmseQuadScenario, diagonal: bool) -> Self {
        Self { s, diagonal, x: CMat::zeros(0, 0), z: CMat::zeros(0, 0), site: (0, 0) }
    }
}

impl SiteKernel for QuadEval<'_> {
    fn refresh(&mut self, x: &PhaseMat) -> Result<()> {
        self.x = if self.diagonal { x.diag_x() } else { x.x() };
        self.z = self.s.phi.as_mat() * &self.x * self.s.pi_m.as_mat();
        Ok(())
    }

    fn begin_site(&mut self, (i, j): (usize, usize)) -> Result<()> {
        self.site = if self.diagonal { (i, i) } else { (i, j) };
        Ok(())
    }

    fn kernel(&self, theta: f64) -> Result<C64> {
        let (i, j) = self.site;
        let xn = cis(theta);
        let delta = xn - self.x[(i, j)];
        let zij = self.z[(i, j)] + delta * self.s.phi.as_mat()[(i, i)] * self.s.pi_m.as_mat()[(j, j)];
        Ok((zij - self.s.b[(i, j)]).conj() * xn)
    }

    fn commit(&mut self, theta: f64) -> Result<()> {
        let (i, j) = self.site;
        let xn = cis(theta);
        let delta = xn - self.x[(i, j)];
        self.z += self.s.phi.as_mat().column(i) * self.s.pi_m.as_mat().row(j) * delta;
        self.x[(i, j)] = xn;
        Ok(())
    }
}

// ---------------------------------------------------------------------------

/// Passive IRS. Keeps `Q^{-1} = (I + H̃H̃^H)^{-1}` and `R = H̃H_2^H`; moving
/// element `i` by `δ` changes `Q` by the Hermitian rank-two term
/// `h̃₁a^H + ah̃₁^H` with `a = δ*r + ½|δ|²‖h₂‖²h̃₁`, handled by Woodbury.
struct IrsEval<'a> {
    s: &'a PassiveIrsScenario,
    mse: bool,
    /// `H_2H_2^H`, fixed for the whole solve.
    g2: CMat,
    lam: Vec<C64>,
    qinv: CMat,
    r: CMat,
    cur: Option<IrsSite>,
}

/// Per-element cache: everything a probe needs is an inner product of
/// `h̃₁`, `r` and their images under `Q^{-1}`.
struct IrsSite {
    i: usize,
    x: C64,
    nh2: f64,
    h1: CVec,
    p1: CVec,
    pr: CVec,
    // inner products
    h1p1: C64,
    h1pr: C64,
    rp1: C64,
    rpr: C64,
}

impl<'a> IrsEval<'a> {
    fn new(s: &'a PassiveIrsScenario, mse: bool) -> Self {
        let g2 = &s.h2 * s.h2.adjoint();
        Self { s, mse, g2, lam: Vec::new(), qinv: CMat::zeros(0, 0), r: CMat::zeros(0, 0), cur: None }
    }

    fn site(&self) -> Result<&IrsSite> {
        self.cur.as_ref().ok_or(Error::InvalidInput("no site selected".into()))
    }
}

/// Woodbury pieces for one probe, expressed in the `(p1, pr)` basis.
struct Probe {
    /// `Q^{-1}a = α p1 + β pr`.
    qa: (C64, C64),
    /// `K^{-1}` of the 2×2 capacitance matrix.
    kinv: [[C64; 2]; 2],
}

impl IrsSite {
    fn probe(&self, delta: C64) -> Result<Probe> {
        let cc = 0.5 * delta.norm_sqr() * self.nh2;
        // a = δ* r + cc h1,  Q^{-1}a = δ* pr + cc p1
        let qa = (C64::new(cc, 0.0), delta.conj());
        // a^H p1, a^H (Q^{-1}a), h1^H p1, h1^H (Q^{-1}a)
        let a_p1 = delta * self.rp1 + cc * self.h1p1;
        let a_pr = delta * self.rpr + cc * self.h1pr;
        let a_qa = qa.0 * a_p1 + qa.1 * a_pr;
        let h1_qa = qa.0 * self.h1p1 + qa.1 * self.h1pr;
        let k = [[C64::ONE + a_p1, a_qa], [self.h1p1, C64::ONE + h1_qa]];
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        if det.norm() <= SM_DENOM_TOL {
            return Err(Error::SingularUpdate { denom: det.norm() });
        }
        let kinv = [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]];
        Ok(Probe { qa, kinv })
    }

    /// `Q'^{-1}y` in the `(p1, pr)` basis given `Q^{-1}y = (y1, yr)` and the
    /// raw inner products `a^H Q^{-1}y`, `h1^H Q^{-1}y`.
    fn apply(&self, pr: &Probe, delta: C64, y: (C64, C64)) -> (C64, C64) {
        let cc = 0.5 * delta.norm_sqr() * self.nh2;
        let a_y = delta * (self.rp1 * y.0 + self.rpr * y.1) + cc * (self.h1p1 * y.0 + self.h1pr * y.1);
        let h1_y = self.h1p1 * y.0 + self.h1pr * y.1;
        let c0 = pr.kinv[0][0] * a_y + pr.kinv[0][1] * h1_y;
        let c1 = pr.kinv[1][0] * a_y + pr.kinv[1][1] * h1_y;
        // subtract [p1, Q^{-1}a]·(c0, c1)
        (y.0 - c0 - c1 * pr.qa.0, y.1 - c1 * pr.qa.1)
    }

    fn basis(&self, v: (C64, C64)) -> CVec {
        &self.p1 * v.0 + &self.pr * v.1
    }
}

impl SiteKernel for IrsEval<'_> {
    fn refresh(&mut self, x: &PhaseMat) -> Result<()> {
        self.lam = unit_column(x);
        let h = self.s.whitened(&self.lam);
        let q = numkernel::identity(self.s.n_r()) + &h * h.adjoint();
        self.qinv = numkernel::inv_hpd(&q)?;
        self.r = &h * self.s.h2.adjoint();
        self.cur = None;
        Ok(())
    }

    fn begin_site(&mut self, (i, _): (usize, usize)) -> Result<()> {
        let h1 = self.s.w1.column(i).clone_owned();
        let r = self.r.column(i).clone_owned();
        let p1 = &self.qinv * &h1;
        let pr = &self.qinv * &r;
        self.cur = Some(IrsSite {
            i,
            x: self.lam[i],
            nh2: self.g2[(i, i)].re,
            h1p1: h1.dotc(&p1),
            h1pr: h1.dotc(&pr),
            rp1: r.dotc(&p1),
            rpr: r.dotc(&pr),
            h1,
            p1,
            pr,
        });
        Ok(())
    }

    fn kernel(&self, theta: f64) -> Result<C64> {
        let st = self.site()?;
        let xn = cis(theta);
        let delta = xn - st.x;
        let pb = st.probe(delta)?;
        // m = r − x‖h2‖²h1 is fixed across probes
        let mx = st.x * st.nh2;
        let z1 = st.apply(&pb, delta, (C64::ONE, C64::ZERO));
        let val = if !self.mse {
            // m^H Q'^{-1} h1
            (st.rp1 * z1.0 + st.rpr * z1.1) - mx.conj() * (st.h1p1 * z1.0 + st.h1pr * z1.1)
        } else {
            let zm = st.apply(&pb, delta, (-mx, C64::ONE));
            st.basis(zm).dotc(&st.basis(z1))
        };
        Ok(xn * val)
    }

    fn commit(&mut self, theta: f64) -> Result<()> {
        let st = self.cur.take().ok_or(Error::InvalidInput("no site selected".into()))?;
        let xn = cis(theta);
        let delta = xn - st.x;
        let pb = st.probe(delta)?;
        // Q'^{-1} = Q^{-1} − [p1, Q^{-1}a] K^{-1} [ (Q^{-1}a)^H ; p1^H ]
        let qa = st.basis(pb.qa);
        let left0 = &st.p1 * pb.kinv[0][0] + &qa * pb.kinv[1][0];
        let left1 = &st.p1 * pb.kinv[0][1] + &qa * pb.kinv[1][1];
        self.qinv -= left0 * qa.adjoint() + left1 * st.p1.adjoint();
        let g2row = self.g2.row(st.i).clone_owned();
        self.r += &st.h1 * g2row * delta;
        self.lam[st.i] = xn;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm_solvers::random_init;
    use crate::numkernel::{HermitianMat, PsdMat};

    fn cm(rows: usize, cols: usize, seed: u64) -> CMat {
        let p = random_init(rows, cols, seed);
        let q = random_init(rows, cols, seed + 1000);
        CMat::from_fn(rows, cols, |i, j| cis(p.get(i, j)) * (0.3 + q.get(i, j) / 7.0))
    }

    fn check(problem: &CmProblem, x: &PhaseMat) {
        let mut ev = build(problem, x).unwrap();
        let mut xx = x.clone();
        for site in x.sites() {
            ev.begin_site(site).unwrap();
            for t in [0.3, 1.7, 4.0] {
                let fast = ev.kernel(t).unwrap();
                let dense = problem.kernel(&xx.with(site.0, site.1, t), site).unwrap();
                assert!((fast - dense).norm() <= 1e-9 * dense.norm().max(1.0), "{site:?} {fast} {dense}");
            }
            let t = 0.1 + site.0 as f64;
            ev.commit(t).unwrap();
            xx.set(site.0, site.1, t);
        }
    }

    #[test]
    fn hybrid_matches_dense() {
        let h = cm(3, 5, 1);
        let s = HybridScenario::from_channel(&h, &PsdMat::identity(3), 3, 1.3).unwrap();
        let x = random_init(5, 3, 2);
        check(&CmProblem::HybridCapacity(s.clone()), &x);
        check(&CmProblem::HybridMse(s), &x);
    }

    #[test]
    fn quad_matches_dense() {
        let phi = HermitianMat::new(PsdMat::gram(&cm(4, 4, 3)).as_mat().clone()).unwrap();
        let pi = HermitianMat::new(PsdMat::gram(&cm(4, 4, 4)).as_mat().clone()).unwrap();
        let s = WmmseQuadScenario::new(phi, pi, cm(4, 4, 5)).unwrap();
        check(&CmProblem::Wmmse(s.clone()), &random_init(4, 4, 6));
        check(&CmProblem::IrsWmmse(s), &random_init(4, 1, 7));
    }

    #[test]
    fn irs_matches_dense() {
        let sigma = PsdMat::new(HermitianMat::new(numkernel::real_diag(&[0.7, 1.5, 1.1])).unwrap()).unwrap();
        let s = PassiveIrsScenario::new(cm(3, 4, 8), cm(3, 6, 9), cm(6, 4, 10), sigma).unwrap();
        let x = random_init(6, 1, 11);
        check(&CmProblem::IrsCapacity(s.clone()), &x);
        check(&CmProblem::IrsMse(s), &x);
    }
}
