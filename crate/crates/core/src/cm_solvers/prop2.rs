//! Coefficient recovery from five kernel probes, stationary phases of a
//! conjugate-linear form and candidate selection.
//!
//! Every element-wise phase derivative has the shape
//! `g(θ) = σ·Im{AX + BX* + C}/den` with `X = e^{jθ}`, `den > 0`. The complex
//! kernel `q = (AX + BX* + C)/den` is what the probes observe, so only its
//! angle carries information about `(A, B, C)`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;

use crate::derivatives::{wrap_phase, PhaseMat};
use crate::error::{Error, Result};
use crate::numkernel::{cis, C64};
use crate::report::Sense;

/// Probe count fixed by the size of the unknown vector.
pub const PROBES: usize = 5;
/// Condition limit for the probe system before rotating.
pub const PROBE_COND_LIMIT: f64 = 1e10;
/// Rotation applied to probes that land on a vanishing kernel.
pub const PROBE_ROTATION: f64 = 0.05;
/// Maximum number of probe rotations.
pub const MAX_ROTATIONS: usize = 5;
/// Step of the central difference used for the second-derivative sign.
pub const SELECT_STEP: f64 = 1e-4;
/// Curvature below which a candidate counts as flat.
pub const FLAT_CURVATURE: f64 = 1e-10;
/// Slack on the arcsin argument before it is treated as inconsistent.
pub const ARCSIN_SLACK: f64 = 1e-9;

/// Five probe phases at one site of a base iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub base: PhaseMat,
    pub probe_phases: [f64; PROBES],
    pub site: (usize, usize),
}

impl ProbeSet {
    /// Probes at `θ + 2πm/5`, everything else shared with `base`.
    pub fn around(base: &PhaseMat, site: (usize, usize)) -> Result<Self> {
        Self::with_offset(base, site, 0.0)
    }

    pub fn with_offset(base: &PhaseMat, site: (usize, usize), offset: f64) -> Result<Self> {
        let (i, j) = site;
        if i >= base.rows() || j >= base.cols() {
            return Err(Error::InvalidInput(format!("site ({i},{j}) outside {}x{}", base.rows(), base.cols())));
        }
        Ok(Self { base: base.clone(), probe_phases: probe_phases(base.get(i, j) + offset), site })
    }

    /// The `m`-th probe solution.
    pub fn probe(&self, m: usize) -> PhaseMat {
        self.base.with(self.site.0, self.site.1, self.probe_phases[m])
    }

    /// Smallest pairwise separation of the probe phases on the circle.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..PROBES {
            for b in a + 1..PROBES {
                let d = wrap_phase(self.probe_phases[a] - self.probe_phases[b]);
                best = best.min(d.min(TAU - d));
            }
        }
        best
    }
}

/// Evenly spaced probe phases starting at `theta`.
pub fn probe_phases(theta: f64) -> [f64; PROBES] {
    std::array::from_fn(|m| wrap_phase(theta + TAU * m as f64 / PROBES as f64))
}

/// Coefficient rows of `Im{AX+BX*+C}` and `Re{AX+BX*+C}` over the unknown
/// ordering `[ReA, ImA, ReB, ImB, ImC, ReC]`.
fn rows_at(theta: f64) -> ([f64; 6], [f64; 6]) {
    let (xi, xr) = theta.sin_cos();
    ([xi, xr, -xi, xr, 1.0, 0.0], [xr, -xi, xr, xi, 0.0, 1.0])
}

/// Evaluates `AX + BX* + C` from the homogeneous vector.
pub fn synthesize(v: &[f64; 6], theta: f64) -> C64 {
    let (im, re) = rows_at(theta);
    let dot = |r: &[f64; 6]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    C64::new(dot(&re), dot(&im))
}

/// Homogeneous vector `[ReA, ImA, ReB, ImB, ImC, ReC]` (unit norm, sign
/// free) from five kernel values.
///
/// Each probe contributes `Re q̂·Im{·} − Im q̂·Re{·} = 0`, the cross-multiplied
/// form of `Im{·} = tan(∠q)·Re{·}`; it stays finite when `Re q` vanishes.
pub fn recover_homogeneous(phases: &[f64; PROBES], kernels: &[C64; PROBES]) -> Result<[f64; 6]> {
    let scale = kernels.iter().map(|q| q.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate("all probe kernels vanish"));
    }
    // one padding row so the SVD returns the full right basis
    let mut r = DMatrix::<f64>::zeros(6, 6);
    for m in 0..PROBES {
        let q = kernels[m];
        if q.norm() <= 1e-14 * scale {
            return Err(Error::Degenerate("probe kernel vanishes"));
        }
        let q = q / q.norm();
        let (im, re) = rows_at(phases[m]);
        for c in 0..6 {
            r[(m, c)] = q.re * im[c] - q.im * re[c];
        }
    }
    let svd = r.svd(false, true);
    let vt = svd.v_t.ok_or(Error::NonFinite("probe system"))?;
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = |k: usize| svd.singular_values[order[k]];
    if s(4) <= s(0) / PROBE_COND_LIMIT {
        return Err(Error::IllConditioned { cond: s(0) / s(4) });
    }
    let row = vt.row(order[5]);
    Ok(std::array::from_fn(|c| row[c]))
}

/// `w = [ReA, ImA, ReB, ImB, ImC]/ReC` from a probe set and the complex
/// kernel value at each probe.
pub fn prop2_recover(probe: &ProbeSet, kernels: &[C64; PROBES]) -> Result<[f64; 5]> {
    if probe.min_separation() < 0.1 {
        return Err(Error::InvalidInput("probe phases closer than 0.1 rad".into()));
    }
    let v = recover_homogeneous(&probe.probe_phases, kernels)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v[5].abs() <= 1e-12 * norm {
        return Err(Error::Degenerate("real part of C vanishes"));
    }
    let w: [f64; 5] = std::array::from_fn(|c| v[c] / v[5]);
    // residual of the tangent form Im{·} − t·Re{·} = 0 at each probe
    let full = [w[0], w[1], w[2], w[3], w[4], 1.0];
    let wn = full.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (m, &theta) in probe.probe_phases.iter().enumerate() {
        let z = synthesize(&full, theta);
        let q = kernels[m] / kernels[m].norm();
        let resid = (q.re * z.im - q.im * z.re).abs();
        if resid > 1e-8 * wn {
            return Err(Error::IllConditioned { cond: resid / wn });
        }
    }
    Ok(w)
}

/// Both zeros of `Im{AX + BX* + C}` given `[ReA, ImA, ReB, ImB, ImC]` up
/// to a common real factor, wrapped to `[0, 2π)`.
///
/// `Im{·} = ẑ₁ sin θ + ẑ₂ cos θ + ImC = r sin(θ + φ) + ImC` with
/// `φ = atan2(ẑ₂, ẑ₁)`, so the zeros are `−φ + asin s` and `π − φ − asin s`.
pub fn stationary_phases(w: &[f64; 5]) -> Result<(f64, f64)> {
    let z1 = w[0] - w[2];
    let z2 = w[1] + w[3];
    let r = z1.hypot(z2);
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(r > 1e-12 * scale.max(f64::MIN_POSITIVE)) || r == 0.0 {
        return Err(Error::Degenerate("any phase stationary"));
    }
    let mut s = -w[4] / r;
    if s.abs() > 1.0 + ARCSIN_SLACK {
        return Err(Error::Degenerate("no stationary point on the circle"));
    }
    s = s.clamp(-1.0, 1.0);
    let phi = z2.atan2(z1);
    let a = s.asin();
    Ok((wrap_phase(-phi + a), wrap_phase(PI - phi - a)))
}

/// Stationary phases from a recovered `w`.
pub fn prop2_phase(w: &[f64; 5]) -> Result<(f64, f64)> {
    stationary_phases(w)
}

/// Stationary phases of the complex coefficients directly.
pub fn coeff_phases(a: C64, b: C64, c: C64) -> Result<(f64, f64)> {
    stationary_phases(&[a.re, a.im, b.re, b.im, c.im])
}

/// Picks the candidate whose curvature matches `sense`.
///
/// The second derivative equals `dg/dθ`, estimated by a central difference
/// of `g`. Returns `(theta, flat)` where `flat` marks a degenerate
/// direction at both candidates (then `theta1` is returned).
pub fn select_by_curvature<G>(g: G, theta1: f64, theta2: f64, sense: Sense) -> Result<(f64, bool)>
where
    G: Fn(f64) -> Result<f64>,
{
    let curvature = |t: f64| -> Result<f64> { Ok((g(t + SELECT_STEP)? - g(t - SELECT_STEP)?) / (2.0 * SELECT_STEP)) };
    let wanted = |d: f64| match sense {
        Sense::Min => d > 0.0,
        Sense::Max => d < 0.0,
    };
    let d1 = curvature(theta1)?;
    if d1.abs() > FLAT_CURVATURE {
        return Ok((if wanted(d1) { theta1 } else { theta2 }, false));
    }
    let d2 = curvature(theta2)?;
    if d2.abs() > FLAT_CURVATURE {
        return Ok((if wanted(d2) { theta2 } else { theta1 }, false));
    }
    Ok((theta1, true))
}

/// Exact sign test on the coefficients: `dg/dθ ∝ σ·Re{AX − BX*}`.
pub fn select_by_coeffs(a: C64, b: C64, sigma: f64, theta1: f64, theta2: f64, sense: Sense) -> (f64, bool) {
    let curv = |t: f64| {
        let x = cis(t);
        sigma * (a * x - b * x.conj()).re
    };
    let wanted = |d: f64| match sense {
        Sense::Min => d > 0.0,
        Sense::Max => d < 0.0,
    };
    let scale = a.norm() + b.norm();
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let d1 = curv(theta1);
    if d1.abs() > tiny {
        return (if wanted(d1) { theta1 } else { theta2 }, false);
    }
    let d2 = curv(theta2);
    if d2.abs() > tiny {
        return (if wanted(d2) { theta2 } else { theta1 }, false);
    }
    (theta1, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_mod_tau(a: f64, b: f64) -> bool {
        let d = wrap_phase(a - b);
        d.min(TAU - d) < 1e-12
    }

    #[test]
    fn cosine_and_sine_zeros() {
        let (a, b) = prop2_phase(&[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let mut got = [a, b];
        got.sort_by(f64::total_cmp);
        assert!(close_mod_tau(got[0], PI / 2.0) && close_mod_tau(got[1], 3.0 * PI / 2.0));
        let (a, b) = prop2_phase(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut got = [a, b];
        got.sort_by(f64::total_cmp);
        assert!(close_mod_tau(got[0], 0.0) || close_mod_tau(got[1], 0.0));
        assert!(close_mod_tau(got[0], PI) || close_mod_tau(got[1], PI));
    }

    #[test]
    fn flat_form_is_degenerate() {
        assert!(matches!(prop2_phase(&[0.0; 5]), Err(Error::Degenerate(_))));
        assert!(matches!(prop2_phase(&[1.0, 0.0, 1.0, 0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn probes_are_separated() {
        let base = PhaseMat::zeros(2, 2);
        let p = ProbeSet::around(&base, (1, 0)).unwrap();
        assert!((p.min_separation() - TAU / 5.0).abs() < 1e-12);
        assert_eq!(p.probe(3).get(0, 0), 0.0);
        assert!(ProbeSet::around(&base, (2, 0)).is_err());
    }
}
