//! CSV results: raw rows, aggregate summary, per-example metrics, failures.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::experiment::{aggregate, ExampleRow, Failure, SweepResult, SweepRow};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const EXAMPLES_FILE: &str = "examples.csv";
pub const FAILURES_FILE: &str = "failures.csv";

const ROW_HEADER: [&str; 6] = ["method", "sweep_value", "seed", "lfd", "psnr_db", "ssim"];

/// Writes via a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

pub fn rows_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    to_csv(
        &ROW_HEADER,
        rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.sweep_value.to_string(),
                r.seed.to_string(),
                r.lfd.to_string(),
                r.psnr_db.to_string(),
                r.ssim.to_string(),
            ]
        }),
    )
}

pub fn summary_csv(result: &SweepResult) -> Result<Vec<u8>> {
    to_csv(
        &[
            "method",
            "sweep_value",
            "n",
            "lfd_mean",
            "lfd_std",
            "psnr_mean",
            "psnr_std",
            "ssim_mean",
            "ssim_std",
        ],
        result.aggregates.iter().map(|a| {
            vec![
                a.method.clone(),
                a.sweep_value.to_string(),
                a.n.to_string(),
                a.lfd.mean.to_string(),
                a.lfd.std.to_string(),
                a.psnr_db.mean.to_string(),
                a.psnr_db.std.to_string(),
                a.ssim.mean.to_string(),
                a.ssim.std.to_string(),
            ]
        }),
    )
}

pub fn examples_csv(rows: &[ExampleRow]) -> Result<Vec<u8>> {
    to_csv(
        &["method", "sweep_value", "seed", "index", "lfd", "psnr_db", "ssim"],
        rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.sweep_value.to_string(),
                r.seed.to_string(),
                r.index.to_string(),
                r.lfd.to_string(),
                r.psnr_db.to_string(),
                r.ssim.to_string(),
            ]
        }),
    )
}

pub fn failures_csv(failures: &[Failure]) -> Result<Vec<u8>> {
    to_csv(
        &["method", "seed", "message"],
        failures
            .iter()
            .map(|f| vec![f.method.clone(), f.seed.to_string(), f.message.clone()]),
    )
}

/// Writes all CSV files and the training logs into `dir`; returns the paths.
pub fn write_results(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put(RESULTS_FILE.into(), rows_csv(&result.rows)?)?;
    put(SUMMARY_FILE.into(), summary_csv(result)?)?;
    put(EXAMPLES_FILE.into(), examples_csv(&result.examples)?)?;
    if !result.failures.is_empty() {
        put(FAILURES_FILE.into(), failures_csv(&result.failures)?)?;
    }
    if !result.train_logs.is_empty() {
        let mut text = String::new();
        for (key, log) in &result.train_logs {
            text.push_str(&format!("# {key}\n{log}"));
        }
        put("train.log".into(), text.into_bytes())?;
    }
    Ok(written)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| HarnessError::Results(format!("line {line}: missing column {}", ROW_HEADER[i])))?;
    raw.parse()
        .map_err(|_| HarnessError::Results(format!("line {line}: bad {} value {raw:?}", ROW_HEADER[i])))
}

pub fn parse_rows(bytes: &[u8]) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ROW_HEADER {
        return Err(HarnessError::Results(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(SweepRow {
            method: field(&rec, 0, line)?,
            sweep_value: field(&rec, 1, line)?,
            seed: field(&rec, 2, line)?,
            lfd: field(&rec, 3, line)?,
            psnr_db: field(&rec, 4, line)?,
            ssim: field(&rec, 5, line)?,
        });
    }
    Ok(rows)
}

/// Rebuilds a result (rows and aggregates) from a `results.csv` file.
pub fn read_results(path: &Path) -> Result<SweepResult> {
    let bytes = fs::read(path).map_err(|e| HarnessError::MissingFile {
        path: path.to_path_buf(),
        source: e,
    })?;
    let rows = parse_rows(&bytes)?;
    let mut result = SweepResult::new(crate::experiment::ExperimentKind::Overall);
    result.aggregates = aggregate(&rows);
    result.rows = rows;
    Ok(result)
}
