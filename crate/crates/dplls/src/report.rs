//! CSV artifacts and the run manifest.
//!
//! `summary.csv` has one row per cell and arm with columns
//! `factor,value,arm,median,q1,q3,count,failures`. Each cell also gets a raw
//! file `raw_<factor>_<value>.csv` with columns `arm,repetition,error`; the
//! summary rows are the pooled quantiles of exactly those errors. Numbers are
//! written in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use dplls_core::{FitResult, ScalingSpec, TaylorWeights};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::record::{ArmPool, ExperimentRecord};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn raw_file_name(record: &ExperimentRecord) -> String {
    format!("raw_{}_{}.csv", record.factor_name, record.factor_value)
}

fn write_raw(path: &Path, record: &ExperimentRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["arm", "repetition", "error"])?;
    for (arm, pool) in [("dp", &record.dp), ("nondp", &record.nondp)] {
        for (rep, err) in &pool.errors {
            w.write_record([arm, &rep.to_string(), &err.to_string()])?;
        }
    }
    finish(w, path)
}

fn summary_row(record: &ExperimentRecord, arm: &str, pool: &ArmPool) -> Vec<String> {
    let mut row = vec![record.factor_name.clone(), record.factor_value.to_string(), arm.to_string()];
    match pool.summary() {
        Some(s) => row.extend([s.median.to_string(), s.q1.to_string(), s.q3.to_string(), s.count.to_string()]),
        None => row.extend([String::new(), String::new(), String::new(), "0".to_string()]),
    }
    row.push(pool.failures.to_string());
    row
}

/// Writes the summary and one raw file per cell into `dir`, records the raw
/// paths on `records`, and returns every file written.
pub fn write_records(dir: &Path, records: &mut [ExperimentRecord]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut outputs = Vec::new();
    let summary_path = dir.join(SUMMARY_FILE);
    let mut w = writer(&summary_path)?;
    w.write_record(["factor", "value", "arm", "median", "q1", "q3", "count", "failures"])?;
    for record in records.iter_mut() {
        let raw_path = dir.join(raw_file_name(record));
        write_raw(&raw_path, record)?;
        w.write_record(summary_row(record, "dp", &record.dp))?;
        w.write_record(summary_row(record, "nondp", &record.nondp))?;
        record.raw_errors_path = Some(raw_path.clone());
        outputs.push(raw_path);
    }
    finish(w, &summary_path)?;
    outputs.insert(0, summary_path);
    Ok(outputs)
}

/// Reads the `error` column of one arm back from a raw file.
pub fn read_raw_errors(path: &Path, arm: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.get(0) == Some(arm) {
            let v = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: "bad error value".into(),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Fitted coefficients on the standardized and raw scales.
pub fn write_coefficients(path: &Path, names: &[String], fit: &FitResult, spec: &ScalingSpec) -> Result<()> {
    let raw = spec.to_raw_params(&fit.params)?;
    let mut w = writer(path)?;
    w.write_record(["term", "standardized", "raw"])?;
    w.write_record(["intercept".to_string(), fit.params.beta[0].to_string(), raw.beta[0].to_string()])?;
    for (j, name) in names.iter().enumerate() {
        w.write_record([name.clone(), fit.params.beta[j + 1].to_string(), raw.beta[j + 1].to_string()])?;
    }
    w.write_record(["sigma".to_string(), fit.params.sigma.to_string(), raw.sigma.to_string()])?;
    finish(w, path)
}

/// Released (noisy) polynomial weights.
pub fn write_weights(path: &Path, weights: &TaylorWeights) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["weight", "value"])?;
    for (label, v) in TaylorWeights::labels(weights.d()).iter().zip(weights.to_flat()) {
        w.write_record([label.as_str(), &v.to_string()])?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed_base: Option<u64>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed_base: Option<u64>, outputs: &[PathBuf]) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            seed_base,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
