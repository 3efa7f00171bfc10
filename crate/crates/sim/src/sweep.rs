//! Monte-Carlo SNR sweeps.

use serde::{Deserialize, Serialize};
use structopt_core::par::Execution;

use crate::channels::trial_seed;
use crate::config::{ExperimentConfig, SolverId};
use crate::error::Result;
use crate::instance::{build_instance, solve};

/// Environment variable capping the worker threads of a sweep.
pub const THREADS_ENV: &str = "STRUCTOPT_THREADS";

/// One aggregated row per (SNR point, solver), or per (N_t, SNR point,
/// solver) for runtime benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub solver: String,
    pub mean_obj: Option<f64>,
    pub std_obj: Option<f64>,
    pub mean_iters: Option<f64>,
    /// Mean seconds per solve; the median for benchmark rows. `None` when
    /// timing is off.
    pub mean_seconds: Option<f64>,
    pub seed: u64,
    /// Trials whose solve returned an error; excluded from the statistics.
    #[serde(default)]
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    /// Benchmark rows: AO seconds over BCD seconds at the same point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn is_bench(&self) -> bool {
        self.rows.iter().any(|r| r.n_t.is_some())
    }
}

/// Per-trial outcome of one solver.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrialOutcome {
    pub objective: f64,
    pub iterations: usize,
    pub seconds: f64,
}

pub(crate) struct Stats {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Mean and sample standard deviation (zero for a single value).
pub(crate) fn stats(v: &[f64]) -> Stats {
    if v.is_empty() {
        return Stats { mean: None, std: None };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Stats { mean: Some(mean), std: Some(var.sqrt()) }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] when set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    f()
}

/// Every (SNR point, trial) draws one channel from its own seed and runs all
/// configured solvers on it. Trials may run in parallel; results are
/// gathered in (SNR, trial, solver) order before aggregation so scheduling
/// never changes the output.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let snrs = cfg.snr.points();
    let jobs = snrs.len() * cfg.trials;
    let outcomes: Vec<Vec<std::result::Result<TrialOutcome, String>>> = with_thread_cap(|| {
        exec.map_range(jobs, |job| {
            let (si, trial) = (job / cfg.trials, job % cfg.trials);
            let seed = trial_seed(cfg.master_seed, si, trial);
            let inst = build_instance(cfg, snrs[si], seed);
            cfg.solvers
                .iter()
                .map(|&solver| {
                    let inst = inst.as_ref().map_err(|e| e.to_string())?;
                    let rep = solve(cfg, inst, solver, seed).map_err(|e| e.to_string())?;
                    Ok(TrialOutcome { objective: rep.objective, iterations: rep.iterations, seconds: rep.seconds })
                })
                .collect()
        })
    });
    let mut rows = Vec::with_capacity(snrs.len() * cfg.solvers.len());
    for (si, &snr_db) in snrs.iter().enumerate() {
        for (k, &solver) in cfg.solvers.iter().enumerate() {
            let trials = &outcomes[si * cfg.trials..(si + 1) * cfg.trials];
            let ok: Vec<TrialOutcome> = trials.iter().filter_map(|t| t[k].as_ref().ok().copied()).collect();
            rows.push(aggregate(cfg, snr_db, solver, &ok, cfg.trials - ok.len()));
        }
    }
    Ok(SweepResult { config: cfg.clone(), rows })
}

fn aggregate(cfg: &ExperimentConfig, snr_db: f64, solver: SolverId, ok: &[TrialOutcome], failures: usize) -> SweepRow {
    let obj: Vec<f64> = ok.iter().map(|t| t.objective).collect();
    let iters: Vec<f64> = ok.iter().map(|t| t.iterations as f64).collect();
    let secs: Vec<f64> = ok.iter().map(|t| t.seconds).collect();
    let s = stats(&obj);
    SweepRow {
        snr_db,
        solver: solver.as_str().to_string(),
        mean_obj: s.mean,
        std_obj: s.std,
        mean_iters: stats(&iters).mean,
        mean_seconds: if cfg.timing { stats(&secs).mean } else { None },
        seed: cfg.master_seed,
        failures,
        n_t: None,
        ratio: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let s = stats(&[1.0, 3.0]);
        assert_eq!(s.mean, Some(2.0));
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(stats(&[5.0]).std, Some(0.0));
        assert!(stats(&[]).mean.is_none());
    }
}
