use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use structopt_core::par::Execution;
use structopt_sim::output::{
    read_json, round12, sidecar_path, to_csv_bytes, to_json, write_results, Format, ResultFile, BENCH_EXTRA,
    CSV_HEADER, SCHEMA_VERSION,
};
use structopt_sim::{run_sweep, ExperimentConfig, SweepResult, SweepRow};

const HEADER: &str = "snr_db,solver,mean_obj,std_obj,mean_iters,mean_seconds,seed";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn row(snr_db: f64, solver: &str, obj: f64) -> SweepRow {
    SweepRow {
        snr_db,
        solver: solver.into(),
        mean_obj: Some(obj),
        std_obj: Some(obj / 7.0),
        mean_iters: Some(3.5),
        mean_seconds: None,
        seed: 42,
        failures: 0,
        n_t: None,
        ratio: None,
    }
}

fn sample() -> SweepResult {
    SweepResult {
        config: ExperimentConfig::default(),
        rows: vec![row(-5.0, "closed_form", 1.0 / 3.0), row(-5.0, "oracle", std::f64::consts::PI * 1e5)],
    }
}

fn csv_records(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn header_is_bit_exact() {
    assert_eq!(CSV_HEADER.join(","), HEADER);
    let empty = SweepResult { config: ExperimentConfig::default(), rows: vec![] };
    assert_eq!(String::from_utf8(to_csv_bytes(&empty).unwrap()).unwrap(), format!("{HEADER}\n"));
}

#[test]
fn bench_rows_append_columns() {
    let mut res = sample();
    res.rows[0].n_t = Some(8);
    res.rows[0].ratio = Some(0.5);
    let text = String::from_utf8(to_csv_bytes(&res).unwrap()).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first, format!("{HEADER},{}", BENCH_EXTRA.join(",")));
    // the row without n_t gets empty cells, keeping the column count
    assert!(text.lines().nth(2).unwrap().ends_with(",,"));
}

#[test]
fn csv_cells_carry_twelve_digits() {
    let (header, rows) = csv_records(&to_csv_bytes(&sample()).unwrap());
    assert_eq!(header, CSV_HEADER);
    assert_eq!(rows[0][2], "0.333333333333");
    assert_eq!(rows[1][2], "314159.265359");
    assert_eq!(rows[0][5], "", "timing off leaves mean_seconds empty");
    assert_eq!(rows[0][6], "42");
    for r in &rows {
        let v: f64 = r[2].parse().unwrap();
        assert_eq!(round12(v), v);
    }
}

#[test]
fn json_round_trip_is_bit_identical() {
    let res = sample();
    let text = to_json(&res).unwrap();
    assert!(text.ends_with('\n'));
    let back: ResultFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back.version, SCHEMA_VERSION);
    assert_eq!(back.config, res.config);
    for (a, b) in back.rows.iter().zip(&res.rows) {
        assert_eq!(a.mean_obj.unwrap().to_bits(), round12(b.mean_obj.unwrap()).to_bits());
        assert_eq!(a.std_obj.unwrap().to_bits(), round12(b.std_obj.unwrap()).to_bits());
    }
    // a second pass changes nothing
    let again = to_json(&SweepResult { config: back.config, rows: back.rows }).unwrap();
    assert_eq!(again, text);
}

#[test]
fn json_has_exactly_the_published_keys() {
    let v: serde_json::Value = serde_json::from_str(&to_json(&sample()).unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["config", "rows", "version"]);
    assert_eq!(v["version"], "1");
    // the path-loss defaults travel with every result
    assert_eq!(v["config"]["pathloss"]["ref_db"], 30.0);
    assert_eq!(v["config"]["pathloss"]["direct_exponent"], 2.2);
    assert_eq!(v["config"]["pathloss"]["irs_exponent"], 2.0);
}

#[test]
fn write_results_files_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("nested/out.csv");
    write_results(&sample(), &csv_path, Format::Csv).unwrap();
    let bytes = fs::read(&csv_path).unwrap();
    assert_eq!(bytes.last(), Some(&b'\n'));
    let side = sidecar_path(&csv_path);
    assert_eq!(side.file_name().unwrap(), "out.csv.config.json");
    let text = fs::read_to_string(&side).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), ExperimentConfig::default());

    let json_path = dir.path().join("out.json");
    write_results(&sample(), &json_path, Format::Json).unwrap();
    assert!(fs::read_to_string(&json_path).unwrap().ends_with('\n'));
    assert_eq!(read_json(&json_path).unwrap().rows.len(), 2);
    assert!(!sidecar_path(&json_path).exists());
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let bad = blocker.join("out.csv");
    let err = write_results(&sample(), &bad, Format::Csv).unwrap_err().to_string();
    assert!(err.contains("file"), "{err}");
    let err = read_json(&dir.path().join("missing.json")).unwrap_err().to_string();
    assert!(err.contains("missing.json"), "{err}");
}

#[test]
fn format_parses() {
    assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
    assert!("xml".parse::<Format>().is_err());
}

fn check_sweep_fixture(name: &str, solvers: &[&str]) {
    let bytes = fs::read(fixture(name)).unwrap();
    let (header, rows) = csv_records(&bytes);
    assert_eq!(header, CSV_HEADER);
    let cfg: ExperimentConfig =
        serde_json::from_str(&fs::read_to_string(fixture(&format!("{name}.config.json"))).unwrap()).unwrap();
    assert_eq!(rows.len(), cfg.snr.points().len() * cfg.solvers.len());
    for (r, s) in rows.iter().zip(solvers.iter().cycle()) {
        assert_eq!(r[1], *s);
    }
    // regenerating from the recorded config reproduces the file byte for byte
    let res = run_sweep(&cfg, Execution::Parallel).unwrap();
    assert_eq!(to_csv_bytes(&res).unwrap(), bytes, "{name} drifted");
}

#[test]
fn golden_sweep_lines() {
    check_sweep_fixture("sweep_lines.csv", &["closed_form", "oracle"]);
}

#[test]
fn golden_hybrid_sweep() {
    check_sweep_fixture("hybrid_sweep.csv", &["ao", "bcd"]);
}

#[test]
fn runtime_fixture_schema() {
    let (header, rows) = csv_records(&fs::read(fixture("runtime.csv")).unwrap());
    let mut expect: Vec<&str> = CSV_HEADER.to_vec();
    expect.extend(BENCH_EXTRA);
    assert_eq!(header, expect);
    assert_eq!(rows.len() % 2, 0);
    for pair in rows.chunks(2) {
        assert_eq!((pair[0][1].as_str(), pair[1][1].as_str()), ("ao", "bcd"));
        assert_eq!(pair[0][7], pair[1][7], "same N_t");
        let (ao, bcd): (f64, f64) = (pair[0][5].parse().unwrap(), pair[1][5].parse().unwrap());
        let ratio: f64 = pair[0][8].parse().unwrap();
        assert!((ratio - ao / bcd).abs() <= 1e-9 * ratio);
    }
}

#[test]
fn convergence_fixture_schema() {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture("convergence.json")).unwrap()).unwrap();
    assert_eq!(v["version"], SCHEMA_VERSION);
    serde_json::from_value::<ExperimentConfig>(v["config"].clone()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let traj: Vec<f64> = r["trajectory"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(traj.len() >= 2);
        assert!(traj.windows(2).all(|w| w[1] <= w[0] + 1e-9), "MSE trajectory must not increase");
        assert_eq!(*traj.last().unwrap(), r["objective"].as_f64().unwrap());
    }
}

proptest! {
    #[test]
    fn round12_is_idempotent(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let r = round12(x);
        prop_assert_eq!(round12(r).to_bits(), r.to_bits());
        if x != 0.0 {
            prop_assert!(((r - x) / x).abs() <= 5e-12);
        }
    }

    #[test]
    fn json_round_trip_any_row(snr in -30.0f64..30.0, obj in -1e6f64..1e6, seed in any::<u64>()) {
        let mut r = row(snr, "ao", obj);
        r.seed = seed;
        let res = SweepResult { config: ExperimentConfig::default(), rows: vec![r] };
        let back: ResultFile = serde_json::from_str(&to_json(&res).unwrap()).unwrap();
        prop_assert_eq!(back.rows[0].seed, seed);
        prop_assert_eq!(back.rows[0].snr_db.to_bits(), round12(snr).to_bits());
        prop_assert_eq!(back.rows[0].mean_obj.unwrap().to_bits(), round12(obj).to_bits());
    }
}
