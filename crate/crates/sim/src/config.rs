//! Experiment configuration. Every field has a default and the full, resolved
//! config is echoed into result files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use structopt_core::baselines::OracleConfig;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    MusimoCapacity,
    MusimoMse,
    AmpIrsCapacity,
    AmpIrsMse,
    BlockdiagCapacity,
    HybridCapacity,
    HybridMse,
    IrsCapacity,
    IrsMse,
}

impl ScenarioKind {
    /// Constant-modulus problems solved by phase sweeps.
    pub fn is_phase(self) -> bool {
        matches!(self, Self::HybridCapacity | Self::HybridMse | Self::IrsCapacity | Self::IrsMse)
    }

    pub fn is_irs(self) -> bool {
        matches!(self, Self::AmpIrsCapacity | Self::AmpIrsMse | Self::IrsCapacity | Self::IrsMse)
    }

    pub fn supports(self, solver: SolverId) -> bool {
        match solver {
            SolverId::ClosedForm | SolverId::Oracle => !self.is_phase(),
            SolverId::Ao | SolverId::Bcd | SolverId::Grid => self.is_phase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverId {
    ClosedForm,
    Oracle,
    Ao,
    Bcd,
    Grid,
}

impl SolverId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::Oracle => "oracle",
            Self::Ao => "ao",
            Self::Bcd => "bcd",
            Self::Grid => "grid",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dimensions {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf: usize,
    /// Users in the multi-user scenarios.
    pub k: usize,
    pub irs_rows: usize,
    pub irs_cols: usize,
}

impl Default for Dimensions {
    fn default() -> Self {
        Self { n_t: 6, n_r: 4, n_rf: 4, k: 4, irs_rows: 8, irs_cols: 8 }
    }
}

impl Dimensions {
    pub fn irs_elements(&self) -> usize {
        self.irs_rows * self.irs_cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Power {
    pub p_sum_dbm: f64,
    pub p_user_dbm: f64,
}

impl Default for Power {
    fn default() -> Self {
        Self { p_sum_dbm: 30.0, p_user_dbm: 25.0 }
    }
}

/// Inclusive grid `start, start + step, …, ≤ stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl Default for SnrGrid {
    fn default() -> Self {
        Self { start_db: -5.0, stop_db: 15.0, step_db: 5.0 }
    }
}

impl SnrGrid {
    pub fn single(db: f64) -> Self {
        Self { start_db: db, stop_db: db, step_db: 1.0 }
    }

    pub fn points(&self) -> Vec<f64> {
        if !(self.step_db > 0.0) || !self.start_db.is_finite() || !self.stop_db.is_finite() {
            return Vec::new();
        }
        let n = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor();
        if n < 0.0 {
            return Vec::new();
        }
        (0..=n as usize).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative objective change that stops the phase sweeps.
    pub eps: f64,
    pub max_iter: usize,
    /// Inner tolerance of the diagonal KKT solvers.
    pub kkt_tol: f64,
    pub grid_resolution: usize,
    pub grid_sweeps: usize,
    pub oracle_step: f64,
    pub oracle_armijo_c: f64,
    pub oracle_shrink: f64,
    pub oracle_max_iter: usize,
    pub oracle_grad_step: f64,
    pub oracle_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = OracleConfig::default();
        Self {
            eps: 1e-6,
            max_iter: 100,
            kkt_tol: 1e-8,
            grid_resolution: 4096,
            grid_sweeps: 5,
            oracle_step: o.step,
            oracle_armijo_c: o.armijo_c,
            oracle_shrink: o.shrink,
            oracle_max_iter: o.max_iter,
            oracle_grad_step: o.grad_step,
            oracle_tol: o.tol,
        }
    }
}

impl Tolerances {
    pub fn oracle(&self) -> OracleConfig {
        OracleConfig {
            step: self.oracle_step,
            armijo_c: self.oracle_armijo_c,
            shrink: self.oracle_shrink,
            max_iter: self.oracle_max_iter,
            grad_step: self.oracle_grad_step,
            tol: self.oracle_tol,
        }
    }
}

/// Distances in metres; amplitudes are normalized to the direct link so only
/// the ratio of the cascaded to the direct path matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLoss {
    pub ref_db: f64,
    pub direct_m: f64,
    pub direct_exponent: f64,
    pub bs_irs_m: f64,
    pub irs_user_m: f64,
    pub irs_exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self { ref_db: 30.0, direct_m: 50.0, direct_exponent: 2.2, bs_irs_m: 45.0, irs_user_m: 5.0, irs_exponent: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSettings {
    pub n_t_list: Vec<usize>,
    pub repetitions: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { n_t_list: vec![8, 14, 22, 30], repetitions: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub dims: Dimensions,
    pub power: Power,
    pub snr: SnrGrid,
    pub trials: usize,
    pub master_seed: u64,
    pub solvers: Vec<SolverId>,
    pub tolerances: Tolerances,
    pub pathloss: PathLoss,
    pub bench: BenchSettings,
    /// Record wall-clock seconds in sweep rows. Off by default because
    /// timings would make otherwise identical runs differ.
    pub timing: bool,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::MusimoCapacity,
            dims: Dimensions::default(),
            power: Power::default(),
            snr: SnrGrid::default(),
            trials: 100,
            master_seed: 1,
            solvers: vec![SolverId::ClosedForm, SolverId::Oracle],
            tolerances: Tolerances::default(),
            pathloss: PathLoss::default(),
            bench: BenchSettings::default(),
            timing: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.into(), source })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| SimError::Json { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr.points().is_empty() {
            return bad(format!("empty SNR grid {:?}", self.snr));
        }
        let d = &self.dims;
        let dims_ok = match self.scenario {
            ScenarioKind::MusimoCapacity | ScenarioKind::MusimoMse => d.n_t > 0 && d.k > 0,
            ScenarioKind::BlockdiagCapacity => d.n_t > 0 && d.n_r > 0 && d.k > 0,
            ScenarioKind::HybridCapacity | ScenarioKind::HybridMse => {
                d.n_t > 0 && d.n_r > 0 && d.n_rf > 0 && d.n_rf <= d.n_t
            }
            _ => d.n_t > 0 && d.n_r > 0 && d.irs_elements() > 0,
        };
        if !dims_ok {
            return bad(format!("dimensions {d:?} do not fit {:?}", self.scenario));
        }
        for s in &self.solvers {
            if !self.scenario.supports(*s) {
                return bad(format!("solver {s} does not apply to {:?}", self.scenario));
            }
        }
        let mut sorted = self.solvers.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.solvers.len() {
            return bad("solver list has duplicates".into());
        }
        let t = &self.tolerances;
        if !(t.eps > 0.0) || t.max_iter == 0 || !(t.kkt_tol > 0.0) || t.grid_resolution == 0 || t.grid_sweeps == 0 {
            return bad("tolerances must be positive".into());
        }
        t.oracle().validate()?;
        let p = &self.pathloss;
        if [p.direct_m, p.bs_irs_m, p.irs_user_m].iter().any(|&m| !(m > 0.0)) {
            return bad("path-loss distances must be positive".into());
        }
        if !self.power.p_sum_dbm.is_finite() || !self.power.p_user_dbm.is_finite() {
            return bad("power budgets must be finite".into());
        }
        Ok(())
    }

    pub fn p_sum(&self) -> f64 {
        crate::channels::dbm_to_watts(self.power.p_sum_dbm)
    }

    pub fn p_user(&self) -> f64 {
        crate::channels::dbm_to_watts(self.power.p_user_dbm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grid_is_inclusive() {
        assert_eq!(SnrGrid::default().points(), vec![-5.0, 0.0, 5.0, 10.0, 15.0]);
        assert_eq!(SnrGrid::single(3.0).points(), vec![3.0]);
        assert!(SnrGrid { start_db: 1.0, stop_db: 0.0, step_db: 1.0 }.points().is_empty());
    }

    #[test]
    fn empty_json_takes_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_mismatched_solver() {
        let cfg = ExperimentConfig { solvers: vec![SolverId::Ao], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
