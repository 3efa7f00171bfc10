mod common;

use std::f64::consts::{FRAC_PI_2, TAU};

use common::{cscg, hermitian, psd, rng};
use proptest::prelude::*;
use rand::Rng;
use structopt_core::derivatives::{self as der, diag_objective as dobj, phase_objective as pobj, DiagVar, PhaseMat};
use structopt_core::numkernel::{CMat, HermitianMat, PsdMat, C64};

fn small_diag(k: usize, seed: u64, complex: bool) -> DiagVar {
    let mut r = rng(seed);
    let d = (0..k)
        .map(|_| C64::new(r.random_range(0.05..0.6), if complex { r.random_range(-0.3..0.3) } else { 0.0 }))
        .collect();
    DiagVar::new(d).unwrap()
}

/// Worst fd error of `(Re f, Im f)` against the real Jacobian of a diagonal rule.
fn diag_fd<F>(f: F, lam: &DiagVar, g: &der::DiagGrad) -> f64
where
    F: Fn(&DiagVar) -> C64,
{
    let at = lam.to_real();
    let (re, im) = g.real_jacobian();
    let f_re = |v: &[f64]| f(&DiagVar::from_real_parts(v).unwrap()).re;
    let f_im = |v: &[f64]| f(&DiagVar::from_real_parts(v).unwrap()).im;
    der::fd_check(f_re, &at, &re).unwrap().max(der::fd_check(f_im, &at, &im).unwrap())
}

fn phase_fd<F>(f: F, x: &PhaseMat, g: &der::PhaseGrad) -> f64
where
    F: Fn(&PhaseMat) -> f64,
{
    let (r, c) = (x.rows(), x.cols());
    der::fd_check(|v| f(&PhaseMat::from_vec(r, c, v).unwrap()), &x.to_vec(), &g.to_vec()).unwrap()
}

#[test]
fn diag_rules_match_finite_differences() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let k = 2 + seed as usize % 5;
        let m = cscg(k, k, &mut r);
        let w = hermitian(k, &mut r);
        let phi = psd(k, 0.2, &mut r);
        let lam = small_diag(k, seed, true);
        let real = small_diag(k, seed + 100, false);

        let g = der::diag_grad_trace_linear(&m).unwrap();
        assert!(diag_fd(|l| dobj::trace_linear(&m, l).into(), &lam, &g) <= 1e-6);
        let g = der::diag_grad_trace_quadratic(&w, &lam).unwrap();
        assert!(diag_fd(|l| dobj::trace_quadratic(&w, l).into(), &lam, &g) <= 1e-6);
        let g = der::diag_grad_trace_inverse(&phi, &real).unwrap();
        assert!(diag_fd(|l| dobj::trace_inverse(&phi, l).unwrap(), &real, &g) <= 1e-6);
        let g = der::diag_grad_logdet(&phi, &real).unwrap();
        assert!(diag_fd(|l| dobj::logdet(&phi, l), &real, &g) <= 1e-6);
        // the holomorphic rules hold off the real axis as well
        let g = der::diag_grad_trace_inverse(&phi, &lam).unwrap();
        assert!(diag_fd(|l| dobj::trace_inverse(&phi, l).unwrap(), &lam, &g) <= 1e-6);
        let g = der::diag_grad_logdet(&phi, &lam).unwrap();
        assert!(diag_fd(|l| dobj::logdet(&phi, l), &lam, &g) <= 1e-6);
    }
}

#[test]
fn diag_inverse_and_logdet_scalar_forms() {
    let lam = [0.5, 2.0, 3.0];
    let d = DiagVar::from_real(&lam).unwrap();
    let phi = PsdMat::identity(3);
    let ti = der::diag_grad_trace_inverse(&phi, &d).unwrap();
    let ld = der::diag_grad_logdet(&phi, &d).unwrap();
    for (k, l) in lam.iter().enumerate() {
        assert!((ti.wrt_var[k].re + 1.0 / (1.0 + l).powi(2)).abs() < 1e-14);
        assert!((ld.wrt_var[k].re - 1.0 / (1.0 + l)).abs() < 1e-14);
    }
}

#[test]
fn symmetrized_forms_agree_for_real_lambda() {
    let mut r = rng(11);
    let phi = psd(4, 0.1, &mut r);
    let lam = small_diag(4, 12, false);
    let ti = der::diag_grad_trace_inverse(&phi, &lam).unwrap().wrt_var;
    let ld = der::diag_grad_logdet(&phi, &lam).unwrap().wrt_var;
    assert!((ti - der::diag_grad_trace_inverse_sym(&phi, &lam).unwrap()).norm() < 1e-10);
    assert!((ld - der::diag_grad_logdet_sym(&phi, &lam).unwrap()).norm() < 1e-10);
}

#[test]
fn phase_rules_match_finite_differences() {
    for seed in 0..10 {
        let mut r = rng(seed + 50);
        let (n, m) = (2 + seed as usize % 4, 1 + seed as usize % 3);
        let x = PhaseMat::from_vec(n, m, &(0..n * m).map(|_| r.random_range(0.0..TAU)).collect::<Vec<_>>()).unwrap();
        let b = cscg(n, m, &mut r);
        let phi_q = hermitian(n, &mut r);
        let pi_q = hermitian(m, &mut r);
        let phi = psd(m, 0.5, &mut r);
        let pi = psd(n, 0.0, &mut r);

        let g = der::phase_grad_trace_linear(&b, &x).unwrap();
        assert!(phase_fd(|x| pobj::trace_linear(&b, x), &x, &g) <= 1e-6);
        let g = der::phase_grad_trace_quadratic(&phi_q, &pi_q, &x).unwrap();
        assert!(phase_fd(|x| pobj::trace_quadratic(&phi_q, &pi_q, x), &x, &g) <= 1e-6);
        let g = der::phase_grad_trace_inverse(phi.as_herm(), pi.as_herm(), &x).unwrap();
        assert!(phase_fd(|x| pobj::trace_inverse(phi.as_herm(), pi.as_herm(), x).unwrap(), &x, &g) <= 1e-6);
        let g = der::phase_grad_logdet(phi.as_herm(), pi.as_herm(), &x).unwrap();
        assert!(phase_fd(|x| pobj::logdet(phi.as_herm(), pi.as_herm(), x).unwrap(), &x, &g) <= 1e-6);
    }
}

#[test]
fn column_trace_inverse_matches_rank_one_closed_form() {
    // f = 1/(1 + x^HΠx); df/dθ_i = −(1+s)^{-2}·ds/dθ_i with ds/dθ_i = −2 Im{(Πx)*_i x_i}
    let mut r = rng(21);
    let pi = psd(3, 0.0, &mut r);
    let x = PhaseMat::column(&[0.3, 1.7, 4.0]).unwrap();
    let xm = x.x();
    let s = (xm.adjoint() * pi.as_mat() * &xm)[(0, 0)].re;
    let px = pi.as_mat() * &xm;
    let g = der::phase_grad_trace_inverse(&HermitianMat::identity(1), pi.as_herm(), &x).unwrap();
    for i in 0..3 {
        let ds = -2.0 * (px[(i, 0)].conj() * xm[(i, 0)]).im;
        assert!((g.g[(i, 0)] + ds / (1.0 + s).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn column_logdet_matches_rank_one_closed_form() {
    // Π = p·p^H: f = log(1 + |p^H x|²)
    let mut r = rng(22);
    let p = cscg(3, 1, &mut r);
    let pi = PsdMat::gram(&p);
    let x = PhaseMat::column(&[2.1, 0.4, 5.5]).unwrap();
    let xm = x.x();
    let z = (p.adjoint() * &xm)[(0, 0)];
    let g = der::phase_grad_logdet(&HermitianMat::identity(1), pi.as_herm(), &x).unwrap();
    for i in 0..3 {
        // d|z|²/dθ_i = 2 Re{z* · p_i* · j x_i}
        let dz = p[(i, 0)].conj() * C64::i() * xm[(i, 0)];
        let expect = 2.0 * (z.conj() * dz).re / (1.0 + z.norm_sqr());
        assert!((g.g[(i, 0)] - expect).abs() < 1e-12);
    }
}

#[test]
fn phase_trace_linear_examples() {
    let b = CMat::from_element(2, 2, C64::new(1.5, 0.0));
    let g = der::phase_grad_trace_linear(&b, &PhaseMat::zeros(2, 2)).unwrap();
    assert!(g.g.iter().all(|v| *v == 0.0));
    let b = CMat::from_element(1, 1, C64::new(1.0, 0.0));
    let g = der::phase_grad_trace_linear(&b, &PhaseMat::column(&[FRAC_PI_2]).unwrap()).unwrap();
    assert!((g.g[(0, 0)] + 2.0).abs() < 1e-15);
}

#[test]
fn shape_mismatch_is_an_error() {
    let x = PhaseMat::zeros(2, 2);
    assert!(der::phase_grad_trace_linear(&CMat::zeros(2, 3), &x).is_err());
    assert!(der::diag_grad_trace_linear(&CMat::zeros(2, 3)).is_err());
    let lam = DiagVar::zeros(3);
    assert!(der::diag_grad_logdet(&PsdMat::identity(2), &lam).is_err());
}

fn phase_strategy() -> impl Strategy<Value = (u64, usize, usize, Vec<f64>)> {
    (any::<u64>(), 1usize..5, 1usize..4)
        .prop_flat_map(|(s, r, c)| (Just(s), Just(r), Just(c), proptest::collection::vec(0.0..TAU, r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phase_rules_are_two_pi_periodic((seed, n, m, th) in phase_strategy(), i in 0usize..4, j in 0usize..3) {
        let (i, j) = (i % n, j % m);
        let mut r = rng(seed);
        let x = PhaseMat::from_vec(n, m, &th).unwrap();
        let mut shifted = x.clone();
        shifted.set(i, j, x.get(i, j) + TAU);
        let b = cscg(n, m, &mut r);
        let q = hermitian(n, &mut r);
        let p = hermitian(m, &mut r);
        let phi = psd(m, 0.5, &mut r);
        let pi = psd(n, 0.0, &mut r);
        let pairs = [
            (der::phase_grad_trace_linear(&b, &x).unwrap(), der::phase_grad_trace_linear(&b, &shifted).unwrap()),
            (der::phase_grad_trace_quadratic(&q, &p, &x).unwrap(), der::phase_grad_trace_quadratic(&q, &p, &shifted).unwrap()),
            (
                der::phase_grad_trace_inverse(phi.as_herm(), pi.as_herm(), &x).unwrap(),
                der::phase_grad_trace_inverse(phi.as_herm(), pi.as_herm(), &shifted).unwrap(),
            ),
            (
                der::phase_grad_logdet(phi.as_herm(), pi.as_herm(), &x).unwrap(),
                der::phase_grad_logdet(phi.as_herm(), pi.as_herm(), &shifted).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            prop_assert!((a.g - b.g).amax() <= 1e-10);
        }
    }

    #[test]
    fn trace_linear_is_odd_in_b((seed, n, m, th) in phase_strategy()) {
        let mut r = rng(seed);
        let x = PhaseMat::from_vec(n, m, &th).unwrap();
        let b = cscg(n, m, &mut r);
        let g = der::phase_grad_trace_linear(&b, &x).unwrap();
        let h = der::phase_grad_trace_linear(&(-b), &x).unwrap();
        prop_assert_eq!(g.g, -h.g);
    }

    #[test]
    fn one_by_one_nonlinear_rules_vanish(seed in any::<u64>(), t in 0.0..TAU) {
        let mut r = rng(seed);
        let x = PhaseMat::column(&[t]).unwrap();
        let a = psd(1, 0.5, &mut r);
        let b = psd(1, 0.0, &mut r);
        prop_assert!(der::phase_grad_trace_quadratic(a.as_herm(), b.as_herm(), &x).unwrap().g[(0, 0)].abs() <= 1e-12);
        prop_assert!(der::phase_grad_trace_inverse(a.as_herm(), b.as_herm(), &x).unwrap().g[(0, 0)].abs() <= 1e-12);
        prop_assert!(der::phase_grad_logdet(a.as_herm(), b.as_herm(), &x).unwrap().g[(0, 0)].abs() <= 1e-12);
    }

    #[test]
    fn hermitian_rules_have_no_conjugate_part(seed in any::<u64>(), k in 1usize..6) {
        let mut r = rng(seed);
        let phi = psd(k, 0.1, &mut r);
        let lam = small_diag(k, seed, false);
        prop_assert!(der::diag_grad_trace_inverse(&phi, &lam).unwrap().wrt_conj.iter().all(|z| *z == C64::new(0.0, 0.0)));
        prop_assert!(der::diag_grad_logdet(&phi, &lam).unwrap().wrt_conj.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn phase_storage_stays_wrapped_and_unit_modulus((_seed, n, m, th) in phase_strategy(), shift in -50.0f64..50.0) {
        let mut x = PhaseMat::from_vec(n, m, &th).unwrap();
        x.set(0, 0, x.get(0, 0) + shift);
        prop_assert!(x.theta().iter().all(|t| (0.0..TAU).contains(t)));
        let xm = x.x();
        prop_assert!((xm.norm_squared() - (n * m) as f64).abs() <= 1e-12);
    }
}

#[test]
fn real_gradient_composition_reproduces_directional_derivative() {
    // df = 2 Re{Σ (∂f/∂Λ*)_k dΛ_k*} for a real-valued f
    let mut r = rng(31);
    let w = hermitian(3, &mut r);
    let lam = small_diag(3, 32, true);
    let g = der::diag_grad_trace_quadratic(&w, &lam).unwrap();
    let dir = [C64::new(0.3, -0.2), C64::new(-0.1, 0.4), C64::new(0.25, 0.05)];
    let h = 1e-6;
    let shifted = |s: f64| {
        let d: Vec<C64> = lam.as_slice().iter().zip(&dir).map(|(a, b)| a + b * s).collect();
        dobj::trace_quadratic(&w, &DiagVar::new(d).unwrap())
    };
    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    let analytic: f64 = 2.0 * g.wrt_conj.iter().zip(&dir).map(|(gc, d)| (gc * d.conj()).re).sum::<f64>();
    assert!((fd - analytic).abs() <= 1e-7 * fd.abs().max(1.0));
}
