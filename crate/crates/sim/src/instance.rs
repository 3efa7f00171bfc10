//! Scenario assembly: one random problem instance per (SNR point, trial).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structopt_core::baselines::{self, OracleTarget};
use structopt_core::cm_solvers::{algorithm1_ao, random_init, CmProblem, HybridScenario, PassiveIrsScenario};
use structopt_core::diag_solvers::amp_irs::{solve_amp_irs_capacity, solve_amp_irs_mse, AmpIrsScenario};
use structopt_core::diag_solvers::blockdiag::{solve_blockdiag_capacity, BlockDiagScenario};
use structopt_core::diag_solvers::musimo::{solve_musimo_capacity, solve_musimo_mse, MuSimoScenario};
use structopt_core::numkernel::{CMat, PsdMat, C64};
use structopt_core::par::Execution;
use structopt_core::report::SolverReport;

use crate::channels::{db_to_linear, derive_seed, gen_cscg_with, pathloss_scale};
use crate::config::{ExperimentConfig, PathLoss, ScenarioKind, SolverId};
use crate::error::{Result, SimError};

/// Sub-stream tags.
const INIT_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub enum Instance {
    Musimo(MuSimoScenario),
    AmpIrs(AmpIrsScenario),
    BlockDiag(BlockDiagScenario),
    Phase(CmProblem),
}

/// Direct, IRS-to-receiver and transmitter-to-IRS amplitude scales,
/// normalized so the direct link has unit gain.
pub fn irs_scales(p: &PathLoss) -> (f64, f64, f64) {
    let direct = pathloss_scale(p.direct_m, p.direct_exponent, p.ref_db);
    let bs_irs = pathloss_scale(p.bs_irs_m, p.irs_exponent, p.ref_db);
    let irs_user = pathloss_scale(p.irs_user_m, p.irs_exponent, p.ref_db);
    (1.0, irs_user, bs_irs / direct)
}

/// Draws `(H0, H1, H2)` for an IRS link with `K` elements.
pub fn irs_channels(n_r: usize, n_t: usize, k: usize, p: &PathLoss, rng: &mut ChaCha8Rng) -> (CMat, CMat, CMat) {
    let (s0, s1, s2) = irs_scales(p);
    let h0 = gen_cscg_with(n_r, n_t, rng) * C64::from(s0);
    let h1 = gen_cscg_with(n_r, k, rng) * C64::from(s1);
    let h2 = gen_cscg_with(k, n_t, rng) * C64::from(s2);
    (h0, h1, h2)
}

/// Builds the instance of `cfg.scenario` at one SNR from a trial seed.
///
/// SNR is `P/σ²` with `P` the sum budget. Scenarios with a fixed isotropic
/// transmit covariance `(P/N_t)I` fold it into an effective noise
/// `(N_t/SNR)I`; the hybrid scenario spreads `P` over the `N_t·N_rf` analog
/// entries through `γ² = P/(N_t·N_rf)`.
pub fn build_instance(cfg: &ExperimentConfig, snr_db: f64, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = &cfg.dims;
    let snr = db_to_linear(snr_db);
    let p = cfg.p_sum();
    let noise = p / snr;
    Ok(match cfg.scenario {
        ScenarioKind::MusimoCapacity | ScenarioKind::MusimoMse => {
            let h = gen_cscg_with(d.n_t, d.k, &mut rng);
            Instance::Musimo(MuSimoScenario::new(h, PsdMat::scaled_identity(d.n_t, noise), p, vec![cfg.p_user(); d.k])?)
        }
        ScenarioKind::BlockdiagCapacity => {
            let hs = (0..d.k).map(|_| gen_cscg_with(d.n_t, d.n_r, &mut rng)).collect();
            Instance::BlockDiag(BlockDiagScenario::new(
                hs,
                PsdMat::scaled_identity(d.n_t, noise),
                vec![cfg.p_user(); d.k],
            )?)
        }
        ScenarioKind::AmpIrsCapacity | ScenarioKind::AmpIrsMse => {
            let (h0, h1, h2) = irs_channels(d.n_r, d.n_t, d.irs_elements(), &cfg.pathloss, &mut rng);
            let sigma = PsdMat::scaled_identity(d.n_r, d.n_t as f64 / snr);
            Instance::AmpIrs(AmpIrsScenario::new(h0, h1, h2, sigma)?)
        }
        ScenarioKind::IrsCapacity | ScenarioKind::IrsMse => {
            let (h0, h1, h2) = irs_channels(d.n_r, d.n_t, d.irs_elements(), &cfg.pathloss, &mut rng);
            let sigma = PsdMat::scaled_identity(d.n_r, d.n_t as f64 / snr);
            let s = PassiveIrsScenario::new(h0, h1, h2, sigma)?;
            Instance::Phase(if cfg.scenario == ScenarioKind::IrsCapacity {
                CmProblem::IrsCapacity(s)
            } else {
                CmProblem::IrsMse(s)
            })
        }
        ScenarioKind::HybridCapacity | ScenarioKind::HybridMse => {
            let h = gen_cscg_with(d.n_r, d.n_t, &mut rng);
            let gamma = (p / (d.n_t * d.n_rf) as f64).sqrt();
            let s = HybridScenario::from_channel(&h, &PsdMat::scaled_identity(d.n_r, noise), d.n_rf, gamma)?;
            Instance::Phase(if cfg.scenario == ScenarioKind::HybridCapacity {
                CmProblem::HybridCapacity(s)
            } else {
                CmProblem::HybridMse(s)
            })
        }
    })
}

/// Runs one solver on one instance. Phase solvers share the initial point
/// derived from `seed`, so compared solvers start identically.
pub fn solve(cfg: &ExperimentConfig, inst: &Instance, solver: SolverId, seed: u64) -> Result<SolverReport> {
    let t = &cfg.tolerances;
    let mse = matches!(cfg.scenario, ScenarioKind::MusimoMse | ScenarioKind::AmpIrsMse);
    let oracle = |target: OracleTarget<'_>| {
        // restarts run sequentially; trials are the parallel axis
        baselines::projected_gradient_oracle(
            &target,
            &t.oracle(),
            derive_seed(seed, ORACLE_STREAM),
            Execution::Sequential,
        )
    };
    let rep = match (inst, solver) {
        (Instance::Musimo(s), SolverId::ClosedForm) if mse => solve_musimo_mse(s, t.kkt_tol)?,
        (Instance::Musimo(s), SolverId::ClosedForm) => solve_musimo_capacity(s, t.kkt_tol)?,
        (Instance::Musimo(s), SolverId::Oracle) if mse => oracle(OracleTarget::MusimoMse(s))?,
        (Instance::Musimo(s), SolverId::Oracle) => oracle(OracleTarget::MusimoCapacity(s))?,
        (Instance::AmpIrs(s), SolverId::ClosedForm) if mse => solve_amp_irs_mse(s, t.eps, t.max_iter)?,
        (Instance::AmpIrs(s), SolverId::ClosedForm) => solve_amp_irs_capacity(s, t.eps, t.max_iter)?,
        (Instance::AmpIrs(s), SolverId::Oracle) if mse => oracle(OracleTarget::AmpIrsMse(s))?,
        (Instance::AmpIrs(s), SolverId::Oracle) => oracle(OracleTarget::AmpIrsCapacity(s))?,
        (Instance::BlockDiag(s), SolverId::ClosedForm) => solve_blockdiag_capacity(s, t.eps, t.kkt_tol)?,
        (Instance::BlockDiag(s), SolverId::Oracle) => oracle(OracleTarget::BlockDiagCapacity(s))?,
        (Instance::Phase(p), SolverId::Ao | SolverId::Bcd | SolverId::Grid) => {
            let (rows, cols) = p.shape();
            let init = random_init(rows, cols, derive_seed(seed, INIT_STREAM));
            match solver {
                SolverId::Ao => algorithm1_ao(p, &init, t.eps, t.max_iter)?,
                SolverId::Bcd => baselines::bcd_elementwise(p, &init, t.eps, t.max_iter)?,
                _ => baselines::grid_search_oracle(p, &init, t.grid_resolution, t.grid_sweeps)?,
            }
        }
        _ => return Err(SimError::Config(format!("solver {solver} does not apply to {:?}", cfg.scenario))),
    };
    Ok(rep)
}
