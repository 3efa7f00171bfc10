//! Runs every acceptance check and prints one PASS/FAIL line each. The
//! determinism check goes through the command-line binary, twice.

use std::process::{Command, ExitCode};
use std::time::Instant;

use structopt_core::par::Execution;
use structopt_sim::acceptance::{self, Check};

const SEED: u64 = 1;

fn cli_sweep(dir: &std::path::Path, cfg: &std::path::Path, name: &str) -> Result<Vec<u8>, String> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_structopt"))
        .args(["sweep", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("sweep exited with {status}"));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn cli_determinism() -> Check {
    let t = Instant::now();
    let run = || -> Result<(bool, String), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = dir.path().join("config.json");
        let text = serde_json::to_string_pretty(&acceptance::determinism_config(SEED)).map_err(|e| e.to_string())?;
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let a = cli_sweep(dir.path(), &cfg, "a.csv")?;
        let b = cli_sweep(dir.path(), &cfg, "b.csv")?;
        let in_process = acceptance::determinism(SEED);
        let same = a == b && !a.is_empty();
        Ok((
            same && in_process.passed,
            format!("two CLI sweeps, {} bytes, identical: {same}; in-process: {}", a.len(), in_process.detail),
        ))
    };
    let (passed, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name: "determinism", passed, detail, seconds: t.elapsed().as_secs_f64() }
}

fn main() -> ExitCode {
    let checks: [fn() -> Check; 9] = [
        || acceptance::gradient_correctness(SEED),
        || acceptance::musimo_optimality(SEED, Execution::Parallel),
        || acceptance::amp_irs_wmmse(SEED, Execution::Parallel),
        || acceptance::blockdiag(SEED),
        || acceptance::prop2_roundtrip(SEED),
        || acceptance::ao_vs_bcd(SEED, Execution::Parallel),
        || acceptance::brute_force(SEED),
        || acceptance::runtime_trend(SEED),
        cli_determinism,
    ];
    let mut failed = 0;
    for check in checks {
        let c = check();
        println!("{c}");
        failed += usize::from(!c.passed);
    }
    println!("acceptance: {} of 9 passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
