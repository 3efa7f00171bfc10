use crate::error::{Error, Result};
use crate::numkernel::{self, CMat, HermitianMat, PsdMat};

/// Hybrid analog-digital transmitter: analog stage `X` (N_t × N_rf) with
/// effective SNR matrix `Π = γ²H^HΣ^{-1}H`.
///
/// The digital stage is assumed to satisfy `F_D F_D^H ≈ γ²I`; that is a
/// modelling assumption carried by `gamma`, not something checked here.
#[derive(Debug, Clone)]
pub struct HybridScenario {
    pub pi_m: PsdMat,
    pub n_rf: usize,
    pub gamma: f64,
}

impl HybridScenario {
    pub fn new(pi_m: PsdMat, n_rf: usize, gamma: f64) -> Result<Self> {
        if n_rf == 0 || n_rf > pi_m.dim() {
            return Err(Error::InvalidInput(format!("n_rf = {n_rf} with N_t = {}", pi_m.dim())));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput("gamma must be positive".into()));
        }
        Ok(Self { pi_m, n_rf, gamma })
    }

    /// Builds `Π = γ²H^HΣ^{-1}H` from an `N_r × N_t` channel.
    pub fn from_channel(h: &CMat, sigma: &PsdMat, n_rf: usize, gamma: f64) -> Result<Self> {
        if h.nrows() != sigma.dim() {
            return Err(Error::DimensionMismatch(format!("H has {} rows, Σ is {}", h.nrows(), sigma.dim())));
        }
        let s = numkernel::psd_inv_sqrt(sigma)?;
        let w = s.as_mat() * h;
        let pi = PsdMat::gram(&w.adjoint()).as_mat() * numkernel::c(gamma * gamma, 0.0);
        Self::new(PsdMat::new(numkernel::hermitize(&pi)?)?, n_rf, gamma)
    }

    pub fn n_t(&self) -> usize {
        self.pi_m.dim()
    }
}

/// Passive IRS link `H = H0 + H1·diag(e^{jθ})·H2` with whitening cached.
#[derive(Debug, Clone)]
pub struct PassiveIrsScenario {
    pub h0: CMat,
    pub h1: CMat,
    pub h2: CMat,
    pub sigma: PsdMat,
    /// `Σ^{-1/2}H0`.
    pub(crate) w0: CMat,
    /// `Σ^{-1/2}H1`.
    pub(crate) w1: CMat,
}

impl PassiveIrsScenario {
    pub fn new(h0: CMat, h1: CMat, h2: CMat, sigma: PsdMat) -> Result<Self> {
        let (nr, nt, k) = (h0.nrows(), h0.ncols(), h1.ncols());
        if h1.nrows() != nr || h2.nrows() != k || h2.ncols() != nt || sigma.dim() != nr || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "H0 {nr}x{nt}, H1 {}x{k}, H2 {}x{}, Σ {}",
                h1.nrows(),
                h2.nrows(),
                h2.ncols(),
                sigma.dim()
            )));
        }
        for (m, what) in [(&h0, "H0"), (&h1, "H1"), (&h2, "H2")] {
            numkernel::ensure_finite(m, what)?;
        }
        let s = numkernel::psd_inv_sqrt(&sigma)?;
        let w0 = s.as_mat() * &h0;
        let w1 = s.as_mat() * &h1;
        Ok(Self { h0, h1, h2, sigma, w0, w1 })
    }

    pub fn k(&self) -> usize {
        self.h1.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h0.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h0.ncols()
    }

    /// Whitened channel `Σ^{-1/2}(H0 + H1ΛH2)` for unit-modulus `λ`.
    pub fn whitened(&self, lam: &[numkernel::C64]) -> CMat {
        let mut scaled = self.w1.clone();
        for (j, l) in lam.iter().enumerate() {
            for r in 0..scaled.nrows() {
                scaled[(r, j)] *= l;
            }
        }
        &self.w0 + scaled * &self.h2
    }
}

/// Quadratic model `Tr(ΦXΠX^H) − Tr(B^HX) − Tr(BX^H)` over a
/// constant-modulus `X`.
///
/// In the diagonal (IRS) use `Φ`, `Π` and `B` are all `K × K` and only the
/// diagonal of `X` is free.
#[derive(Debug, Clone)]
pub struct WmmseQuadScenario {
    pub phi: HermitianMat,
    pub pi_m: HermitianMat,
    pub b: CMat,
}

impl WmmseQuadScenario {
    pub fn new(phi: HermitianMat, pi_m: HermitianMat, b: CMat) -> Result<Self> {
        if b.nrows() != phi.dim() || b.ncols() != pi_m.dim() {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, Φ {}, Π {}",
                b.nrows(),
                b.ncols(),
                phi.dim(),
                pi_m.dim()
            )));
        }
        numkernel::ensure_finite(&b, "B")?;
        for m in [&phi, &pi_m] {
            PsdMat::new(m.clone())?;
        }
        Ok(Self { phi, pi_m, b })
    }

    pub fn rows(&self) -> usize {
        self.phi.dim()
    }

    pub fn cols(&self) -> usize {
        self.pi_m.dim()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }
}
