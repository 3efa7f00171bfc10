#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use structopt_core::numkernel::{self, CMat, HermitianMat, PsdMat, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cscg(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMat {
    let s = 0.5f64.sqrt();
    CMat::from_fn(r, c, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

pub fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMat {
    numkernel::hermitize(&cscg(n, n, rng)).unwrap()
}

/// `A·A^H + shift·I`.
pub fn psd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> PsdMat {
    let a = cscg(n, n, rng);
    let m = &a * a.adjoint() + numkernel::identity(n) * C64::from(shift);
    PsdMat::new(numkernel::hermitize(&m).unwrap()).unwrap()
}

pub fn frob(a: &CMat) -> f64 {
    a.norm()
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
