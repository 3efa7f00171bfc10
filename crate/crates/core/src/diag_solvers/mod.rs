//! Closed-form KKT solvers for diagonal-structure problems.
//!
//! * [`musimo`]: multi-user SIMO uplink power allocation (capacity and MSE).
//! * [`amp_irs`]: amplitude-adjustable IRS via WMMSE alternation.
//! * [`blockdiag`]: block-diagonal MU-MIMO uplink by eigenspace alignment.

pub mod amp_irs;
pub mod blockdiag;
pub mod musimo;

pub use amp_irs::{
    solve_amp_irs_capacity, solve_amp_irs_mse, wmmse_update_g, wmmse_update_lambda, wmmse_update_w, AmpIrsScenario,
    LambdaUpdate,
};
pub use blockdiag::{solve_blockdiag_capacity, BlockDiagScenario};
pub use musimo::{solve_musimo_capacity, solve_musimo_mse, KktWorkspace, MuSimoScenario};

use crate::error::{Error, Result};

/// Maximum bisection steps for every multiplier search.
pub const BISECTION_STEPS: usize = 200;

/// Water-filling `a_i = clip(1/μ − 1/g_i, 0, cap_i)` with `Σa = min(budget, Σcap)`.
///
/// Bisection runs on the water level `1/μ`, which the allocation is
/// monotone in.
pub fn waterfill(gains: &[f64], budget: f64, caps: &[f64]) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::InvalidInput("waterfill needs at least one gain".into()));
    }
    if caps.len() != gains.len() {
        return Err(Error::DimensionMismatch(format!("{} gains vs {} caps", gains.len(), caps.len())));
    }
    if !(budget > 0.0) || gains.iter().any(|&g| !(g > 0.0)) || caps.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidInput("waterfill needs positive gains and budget".into()));
    }
    let fill = |level: f64| -> Vec<f64> {
        gains.iter().zip(caps).map(|(&g, &cap)| (level - 1.0 / g).clamp(0.0, cap)).collect()
    };
    let cap_sum: f64 = caps.iter().sum();
    if cap_sum <= budget {
        return Ok(caps.to_vec());
    }
    // At this level every coordinate is either capped or holds the whole budget.
    let mut hi = budget + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max);
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mut a = fill(lo);
    // Spread the last sub-ulp residual over the free coordinates.
    let free: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0 && a[i] < caps[i]).collect();
    let gap = budget - a.iter().sum::<f64>();
    if !free.is_empty() && gap > 0.0 {
        let share = gap / free.len() as f64;
        for &i in &free {
            a[i] = (a[i] + share).min(caps[i]);
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_gains_split_evenly() {
        let a = waterfill(&[1.0, 1.0], 2.0, &[f64::INFINITY, f64::INFINITY]).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn caps_bind() {
        let a = waterfill(&[2.0, 1.0], 100.0, &[0.1, 0.1]).unwrap();
        assert_eq!(a, vec![0.1, 0.1]);
    }

    #[test]
    fn weak_channel_gets_nothing() {
        let a = waterfill(&[10.0, 0.01], 0.5, &[f64::INFINITY; 2]).unwrap();
        assert_eq!(a[1], 0.0);
        assert!((a[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(waterfill(&[], 1.0, &[]).is_err());
        assert!(waterfill(&[1.0], 0.0, &[1.0]).is_err());
        assert!(waterfill(&[0.0], 1.0, &[1.0]).is_err());
    }
}
