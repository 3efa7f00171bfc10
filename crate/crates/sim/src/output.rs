//! CSV and JSON result files.
//!
//! CSV: header `snr_db,solver,mean_obj,std_obj,mean_iters,mean_seconds,seed`,
//! benchmark files append `n_t,ratio`. Missing values are empty cells.
//! JSON: `{"config": {...}, "rows": [...], "version": "1"}`.
//! Numbers carry 12 significant digits in both formats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Result, SimError};
use crate::sweep::{SweepResult, SweepRow};

pub const SCHEMA_VERSION: &str = "1";
pub const CSV_HEADER: [&str; 7] = ["snr_db", "solver", "mean_obj", "std_obj", "mean_iters", "mean_seconds", "seed"];
pub const BENCH_EXTRA: [&str; 2] = ["n_t", "ratio"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (csv|json)")),
        }
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => round12(v).to_string(),
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

pub fn write_csv<W: Write>(res: &SweepResult, out: W) -> Result<()> {
    let bench = res.is_bench();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if bench {
        header.extend(BENCH_EXTRA);
    }
    w.write_record(&header)?;
    for r in &res.rows {
        let mut rec = vec![
            cell(Some(r.snr_db)),
            r.solver.clone(),
            cell(r.mean_obj),
            cell(r.std_obj),
            cell(r.mean_iters),
            cell(r.mean_seconds),
            r.seed.to_string(),
        ];
        if bench {
            rec.push(r.n_t.map(|n| n.to_string()).unwrap_or_default());
            rec.push(cell(r.ratio));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| SimError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub version: String,
}

fn rounded(r: &SweepRow) -> SweepRow {
    let f = |x: Option<f64>| x.map(round12);
    SweepRow {
        snr_db: round12(r.snr_db),
        mean_obj: f(r.mean_obj),
        std_obj: f(r.std_obj),
        mean_iters: f(r.mean_iters),
        mean_seconds: f(r.mean_seconds),
        ratio: f(r.ratio),
        ..r.clone()
    }
}

pub fn to_json(res: &SweepResult) -> Result<String> {
    let file = ResultFile {
        config: res.config.clone(),
        rows: res.rows.iter().map(rounded).collect(),
        version: SCHEMA_VERSION.to_string(),
    };
    let mut s = serde_json::to_string_pretty(&file)
        .map_err(|source| SimError::Json { path: PathBuf::from("<memory>"), source })?;
    s.push('\n');
    Ok(s)
}

pub fn to_csv_bytes(res: &SweepResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(res, &mut buf)?;
    Ok(buf)
}

/// Writes `res` to `path`. CSV output gets a `<path>.config.json` sidecar
/// holding the resolved config, since the CSV itself has no room for it.
pub fn write_results(res: &SweepResult, path: &Path, format: Format) -> Result<()> {
    let io = |source| SimError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    match format {
        Format::Csv => {
            fs::write(path, to_csv_bytes(res)?).map_err(io)?;
            let side = sidecar_path(path);
            let cfg = serde_json::to_string_pretty(&res.config)
                .map_err(|source| SimError::Json { path: side.clone(), source })?;
            fs::write(&side, cfg + "\n").map_err(|source| SimError::Io { path: side, source })?;
        }
        Format::Json => fs::write(path, to_json(res)?).map_err(io)?,
    }
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

pub fn read_json(path: &Path) -> Result<ResultFile> {
    let text = fs::read_to_string(path).map_err(|source| SimError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| SimError::Json { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(123456.7890123456), 123456.789012);
        assert_eq!(round12(0.0), 0.0);
    }
}
