//! Wall-clock comparison of the alternating solver and the coefficient-path
//! baseline as the transmit dimension grows.

use std::time::Instant;

use crate::channels::trial_seed;
use crate::config::{ExperimentConfig, ScenarioKind, SolverId};
use crate::error::{Result, SimError};
use crate::instance::{build_instance, solve, Instance};
use crate::sweep::{stats, SweepResult, SweepRow};

/// Median of a non-empty sample.
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over `reps` timed solves after one discarded warm-up solve.
pub fn time_solver(
    cfg: &ExperimentConfig,
    inst: &Instance,
    solver: SolverId,
    seed: u64,
    reps: usize,
) -> Result<(f64, f64, usize)> {
    let warm = solve(cfg, inst, solver, seed)?;
    let mut secs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        solve(cfg, inst, solver, seed)?;
        secs.push(t.elapsed().as_secs_f64());
    }
    Ok((median(&mut secs), warm.objective, warm.iterations))
}

/// For every `N_t` in `cfg.bench.n_t_list` and every SNR point: per trial the
/// median-of-`repetitions` solve time of AO and BCD on identical channels and
/// initial points; a row holds the median over trials and the AO/BCD ratio.
/// Runs sequentially so timings do not compete for cores.
pub fn bench_runtime(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.scenario != ScenarioKind::IrsCapacity {
        return Err(SimError::Config("bench runs the passive-IRS capacity scenario".into()));
    }
    if cfg.bench.n_t_list.is_empty() || cfg.bench.repetitions == 0 {
        return Err(SimError::Config("bench needs a non-empty N_t list and repetitions".into()));
    }
    let solvers = [SolverId::Ao, SolverId::Bcd];
    let mut rows = Vec::new();
    for &n_t in &cfg.bench.n_t_list {
        let mut c = cfg.clone();
        c.dims.n_t = n_t;
        c.validate()?;
        for (si, snr_db) in cfg.snr.points().into_iter().enumerate() {
            let mut secs = [Vec::new(), Vec::new()];
            let mut obj = [Vec::new(), Vec::new()];
            let mut iters = [Vec::new(), Vec::new()];
            let mut failures = [0usize; 2];
            for trial in 0..cfg.trials {
                let seed = trial_seed(cfg.master_seed, si, trial);
                let inst = build_instance(&c, snr_db, seed)?;
                for (k, &solver) in solvers.iter().enumerate() {
                    match time_solver(&c, &inst, solver, seed, cfg.bench.repetitions) {
                        Ok((t, f, it)) => {
                            secs[k].push(t);
                            obj[k].push(f);
                            iters[k].push(it as f64);
                        }
                        Err(_) => failures[k] += 1,
                    }
                }
            }
            let med: Vec<Option<f64>> =
                secs.iter_mut().map(|v| if v.is_empty() { None } else { Some(median(v)) }).collect();
            let ratio = match (med[0], med[1]) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            for (k, &solver) in solvers.iter().enumerate() {
                let s = stats(&obj[k]);
                rows.push(SweepRow {
                    snr_db,
                    solver: solver.as_str().to_string(),
                    mean_obj: s.mean,
                    std_obj: s.std,
                    mean_iters: stats(&iters[k]).mean,
                    mean_seconds: med[k],
                    seed: cfg.master_seed,
                    failures: failures[k],
                    n_t: Some(n_t),
                    ratio,
                });
            }
        }
    }
    Ok(SweepResult { config: cfg.clone(), rows })
}
