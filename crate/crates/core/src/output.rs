//! CSV time series and JSON summaries.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed write never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critical::CriticalRates;
use crate::error::{Error, Result};
use crate::harness::{ReplicaRow, RunSummary, SweepTable};
use crate::metrics::{ClassifierThresholds, StepRecord};
use crate::traffic::DISTANCE_CLAMP_FRACTION;
use crate::world::TURN_HALF_WIDTH;

pub const SERIES_HEADER: [&str; 9] = [
    "t",
    "S",
    "n_c",
    "E_total",
    "E_max",
    "E_min",
    "generated",
    "forwarded",
    "arrived",
];

/// Fixed modelling constants, echoed into every summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConstants {
    pub turn_half_width: f64,
    pub distance_clamp_fraction: f64,
    pub link_rule: String,
    pub congested_rule: String,
    pub death_rule: String,
    pub delta_s_window: String,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            turn_half_width: TURN_HALF_WIDTH,
            distance_clamp_fraction: DISTANCE_CLAMP_FRACTION,
            link_rule: "minimum-image distance <= radius".into(),
            congested_rule: "queue length > capacity at delivery start".into(),
            death_rule: "min energy < hop cost".into(),
            delta_s_window:
                "(S(end) - S(t0)) / (end - t0), t0 = min(transient_cutoff, transient_fraction * run length)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDocument {
    pub summary: RunSummary,
    pub thresholds: ClassifierThresholds,
    pub constants: ModelConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicasDocument {
    pub row: ReplicaRow,
    pub thresholds: ClassifierThresholds,
    pub constants: ModelConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    pub table: SweepTable,
    pub thresholds: ClassifierThresholds,
    pub constants: ModelConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalDocument {
    pub rates: CriticalRates,
    pub thresholds: ClassifierThresholds,
    pub constants: ModelConstants,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = {
        let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".partial");
        path.with_file_name(name)
    };
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn series_csv(records: &[StepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| Error::Usage(format!("csv encoding failed: {e}"));
    w.write_record(SERIES_HEADER).map_err(row_err)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.s.to_string(),
            r.n_c.to_string(),
            r.e_total.to_string(),
            r.e_max.to_string(),
            r.e_min.to_string(),
            r.generated.to_string(),
            r.forwarded.to_string(),
            r.arrived.to_string(),
        ])
        .map_err(row_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("csv encoding failed: {e}")))
}

/// Parses a series CSV produced by [`series_csv`].
pub fn read_series_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Usage(format!("{}: {other:?}", path.display())),
    })?;
    let headers = r
        .headers()
        .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(SERIES_HEADER.iter().copied()) {
        return Err(Error::Usage(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Usage(format!("{}: {e}", path.display()))))
        .collect()
}

pub const SWEEP_HEADER: [&str; 19] = [
    "value",
    "n_runs",
    "died",
    "T_mean",
    "T_stderr",
    "delta_S_mean",
    "delta_S_stderr",
    "tau0_mean",
    "tau0_stderr",
    "k_mean",
    "k_stderr",
    "R_T_mean",
    "R_T_stderr",
    "T_eq_no_congestion_mean",
    "no",
    "slow",
    "fast",
    "absolute",
    "majority_state",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[ReplicaRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| Error::Usage(format!("csv encoding failed: {e}"));
    w.write_record(SWEEP_HEADER).map_err(row_err)?;
    for r in rows {
        w.write_record([
            opt(r.value),
            r.n_runs.to_string(),
            r.died.to_string(),
            opt(r.lifetime.mean),
            opt(r.lifetime.stderr),
            opt(r.delta_s.mean),
            opt(r.delta_s.stderr),
            opt(r.tau0.mean),
            opt(r.tau0.stderr),
            opt(r.k.mean),
            opt(r.k.stderr),
            opt(r.range_at_death.mean),
            opt(r.range_at_death.stderr),
            opt(r.predicted_no_congestion.mean),
            r.states.no.to_string(),
            r.states.slow.to_string(),
            r.states.fast.to_string(),
            r.states.absolute.to_string(),
            r.majority_state.map(|s| s.name().to_string()).unwrap_or_default(),
        ])
        .map_err(row_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("csv encoding failed: {e}")))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Usage(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `series.csv` and `summary.json` for one run; returns their paths.
pub fn emit_run(dir: &Path, records: &[StepRecord], doc: &RunDocument) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join("series.csv");
    let json_path = dir.join("summary.json");
    write_atomic(&csv_path, &series_csv(records)?)?;
    write_atomic(&json_path, &json_bytes(doc)?)?;
    Ok(vec![csv_path, json_path])
}

pub fn emit_replicas(dir: &Path, doc: &ReplicasDocument) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join("replicas.json");
    write_atomic(&path, &json_bytes(doc)?)?;
    Ok(vec![path])
}

/// Writes `sweep.csv` (one row per value) and `sweep.json`.
pub fn emit_sweep(dir: &Path, doc: &SweepDocument) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join("sweep.csv");
    let json_path = dir.join("sweep.json");
    write_atomic(&csv_path, &sweep_csv(&doc.table.rows)?)?;
    write_atomic(&json_path, &json_bytes(doc)?)?;
    Ok(vec![csv_path, json_path])
}

pub fn emit_critical(dir: &Path, doc: &CriticalDocument) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join("critical_rates.json");
    write_atomic(&path, &json_bytes(doc)?)?;
    Ok(vec![path])
}
