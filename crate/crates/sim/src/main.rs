use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use structopt_core::par::Execution;
use structopt_sim::acceptance;
use structopt_sim::bench::bench_runtime;
use structopt_sim::channels::trial_seed;
use structopt_sim::instance::{build_instance, solve};
use structopt_sim::output::{write_results, Format, SCHEMA_VERSION};
use structopt_sim::{run_sweep, ExperimentConfig, Result, SimError};

#[derive(Parser)]
#[command(name = "structopt", version, about = "Structured matrix optimization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; falls back to the config's `output` field.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every gradient rule against finite differences.
    DeriveCheck(Common),
    /// Solve a single instance (first SNR point, trial 0) with every
    /// configured solver and write the objective trajectories as JSON.
    Solve(Common),
    /// Monte-Carlo SNR sweep.
    Sweep(Common),
    /// AO vs BCD wall-clock over the configured N_t list.
    Bench(Common),
    /// Run the acceptance suite.
    Selftest(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(c: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    c.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

fn exec(c: &Common) -> Execution {
    if c.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_checks(checks: &[acceptance::Check]) -> bool {
    for c in checks {
        println!("{c}");
    }
    checks.iter().all(|c| c.passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::DeriveCheck(c) => {
            let seed = c.seed.unwrap_or(1);
            Ok(print_checks(&[acceptance::gradient_correctness(seed)]))
        }
        Cmd::Solve(c) => {
            let cfg = load(&c)?;
            let snr = cfg.snr.points()[0];
            let seed = trial_seed(cfg.master_seed, 0, 0);
            let inst = build_instance(&cfg, snr, seed)?;
            let mut rows = Vec::new();
            for &solver in &cfg.solvers {
                let rep = solve(&cfg, &inst, solver, seed)?;
                println!(
                    "{solver}: objective {:.9} after {} iterations ({:.3}s){}",
                    rep.objective,
                    rep.iterations,
                    rep.seconds,
                    if rep.flags.is_empty() { String::new() } else { format!(", flags {:?}", rep.flags) }
                );
                rows.push(json!({
                    "solver": solver.as_str(),
                    "snr_db": snr,
                    "objective": rep.objective,
                    "iterations": rep.iterations,
                    "converged": rep.converged,
                    "trajectory": rep.trajectory,
                    "flags": rep.flags.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>(),
                }));
            }
            if let Some(path) = out_path(&c, &cfg) {
                let doc = json!({ "config": cfg, "rows": rows, "version": SCHEMA_VERSION });
                let text = serde_json::to_string_pretty(&doc)
                    .map_err(|source| SimError::Json { path: path.clone(), source })?;
                std::fs::write(&path, text + "\n").map_err(|source| SimError::Io { path, source })?;
            }
            Ok(true)
        }
        Cmd::Sweep(c) => {
            let cfg = load(&c)?;
            let res = run_sweep(&cfg, exec(&c))?;
            match out_path(&c, &cfg) {
                Some(p) => write_results(&res, &p, c.format)?,
                None => std::io::Write::write_all(&mut std::io::stdout(), &structopt_sim::output::to_csv_bytes(&res)?)
                    .map_err(|source| SimError::Io { path: "<stdout>".into(), source })?,
            }
            Ok(res.rows.iter().all(|r| r.failures == 0))
        }
        Cmd::Bench(c) => {
            let cfg = load(&c)?;
            let res = bench_runtime(&cfg)?;
            match out_path(&c, &cfg) {
                Some(p) => write_results(&res, &p, c.format)?,
                None => std::io::Write::write_all(&mut std::io::stdout(), &structopt_sim::output::to_csv_bytes(&res)?)
                    .map_err(|source| SimError::Io { path: "<stdout>".into(), source })?,
            }
            Ok(true)
        }
        Cmd::Selftest(c) => {
            let seed = c.seed.unwrap_or(1);
            Ok(print_checks(&acceptance::run_all(seed, exec(&c))))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
