//! Report types and their JSON/CSV encodings.
//!
//! JSON carries the whole report. CSV carries one row per run, with a header,
//! and the rest of the report goes to `<path>.summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{AuditMode, ReportFormat};
use crate::error::Result;
use crate::pipeline::MParamsTable;
use crate::sampler::StabilityTable;

pub const SCHEMA_VERSION: u32 = 1;

/// A named pass/fail assertion with a human-readable explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub trait Report: Serialize + DeserializeOwned {
    type Row: Serialize + DeserializeOwned;

    fn rows(&self) -> &[Self::Row];
    fn checks(&self) -> &[Check];
    /// The report without its per-run rows.
    fn summary(&self) -> Self;

    fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

macro_rules! impl_report {
    ($t:ty, $row:ty) => {
        impl Report for $t {
            type Row = $row;

            fn rows(&self) -> &[$row] {
                &self.rows
            }

            fn checks(&self) -> &[Check] {
                &self.checks
            }

            fn summary(&self) -> Self {
                Self {
                    rows: Vec::new(),
                    ..self.clone()
                }
            }
        }
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub run_id: u64,
    pub k_chosen: u32,
    pub failed: bool,
    pub draws_used: u64,
    pub hypothesis_fingerprint: String,
    pub population_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFrequency {
    pub fingerprint: String,
    pub count: u64,
    pub frequency: f64,
    pub frequency_lower: f64,
    pub frequency_upper: f64,
    pub population_loss: f64,
    /// Frequency at least the stability guarantee.
    pub frequent: bool,
    /// `ln(1/p_lower)/n`: the loss bound for a hypothesis that is output
    /// with probability at least `p_lower` and is consistent with `n` fresh
    /// examples.
    pub consistency_bound: Option<f64>,
    /// `2^(d+2)/n` plus the statistical slack
    /// `max(0, ln(1/p_lower) − ln(1/freq_threshold))/n`.
    pub accuracy_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schema_version: u32,
    pub seed: u64,
    pub runs: u64,
    pub params: StabilityTable,
    pub target: String,
    pub fail_count: u64,
    pub fail_rate: f64,
    /// Sorted by count, most frequent first; Fail runs are not counted.
    pub hypotheses: Vec<HypothesisFrequency>,
    pub max_frequency: f64,
    pub max_hypothesis: Option<String>,
    pub eta_guarantee: f64,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub rows: Vec<StabilityRow>,
}
impl_report!(StabilityReport, StabilityRow);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistakeRow {
    pub run_id: u64,
    pub mistake_count: usize,
    pub final_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistakeBin {
    pub mistakes: usize,
    pub count: u64,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistakeReport {
    pub schema_version: u32,
    pub seed: u64,
    pub runs: u64,
    pub sample_len: usize,
    pub ldim: i32,
    pub target: String,
    pub histogram: Vec<MistakeBin>,
    pub max_observed: usize,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub rows: Vec<MistakeRow>,
}
impl_report!(MistakeReport, MistakeRow);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsRow {
    pub attempt: u64,
    pub failed: bool,
    pub draws_used: u64,
    pub rejection_rounds: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub level: usize,
    pub params: StabilityTable,
    pub target: String,
    pub successes: u64,
    pub fails: u64,
    /// Over successful samples.
    pub mean_draws: f64,
    pub std_draws: f64,
    pub max_draws: u64,
    /// Mean restarts per level over successful samples, level 1 first.
    pub mean_rejection_rounds: Vec<f64>,
    /// `4^(level+1)·n`.
    pub expected_bound: f64,
    /// Three standard errors of the mean.
    pub slack: f64,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub rows: Vec<DrawsRow>,
}
impl_report!(DrawsReport, DrawsRow);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E2eRow {
    pub trial: u64,
    pub fingerprint: String,
    pub population_loss: f64,
    pub success: bool,
    pub failed: bool,
    pub failed_batches: u64,
    pub distinct_batch_outputs: usize,
    pub released_list_size: usize,
    pub pruned_list_size: usize,
    pub hist_epsilon: f64,
    pub hist_delta: f64,
    pub em_epsilon: f64,
    pub em_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: u64,
    pub params: MParamsTable,
    /// Batches actually run (differs from `params.k` in reduced runs).
    pub batches: u64,
    pub target: String,
    pub successes: u64,
    pub success_rate: f64,
    pub success_lower: f64,
    pub success_upper: f64,
    pub required_rate: f64,
    pub failed_runs: u64,
    pub max_pruned_list_size: usize,
    pub pruned_bound: usize,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub rows: Vec<E2eRow>,
}
impl_report!(E2eReport, E2eRow);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpAuditRow {
    pub index: u64,
    pub log_ratio: Option<f64>,
    pub p: Option<f64>,
    pub p_minus: Option<f64>,
    pub p_plus: Option<f64>,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpAuditReport {
    pub schema_version: u32,
    pub mode: AuditMode,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    /// Largest `|ln p/p′|` over audited outputs (EM) or over neighboring
    /// counts with both probabilities positive (histogram).
    pub worst_log_ratio: f64,
    pub audited: u64,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub rows: Vec<DpAuditRow>,
}
impl_report!(DpAuditReport, DpAuditRow);

/// Where the summary of a CSV report goes.
pub fn summary_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

pub fn to_json<R: Report>(report: &R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn rows_to_csv<R: Report>(report: &R) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in report.rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn emit_report<R: Report>(report: &R, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(to_json(report)?.as_bytes())?;
            f.flush()?;
        }
        ReportFormat::Csv => {
            std::fs::write(path, rows_to_csv(report)?)?;
            std::fs::write(summary_path(path), to_json(&report.summary())?)?;
        }
    }
    Ok(())
}

/// Same as [`emit_report`] with the format given by name.
pub fn emit_report_named<R: Report>(report: &R, path: &Path, format: &str) -> Result<()> {
    emit_report(report, path, format.parse()?)
}

pub fn read_json_report<R: Report>(path: &Path) -> Result<R> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Reads back a report written as CSV: the summary plus its rows.
pub fn read_csv_report<R: Report>(path: &Path) -> Result<R> {
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(summary_path(path))?)?;
    let rows = csv::Reader::from_path(path)?
        .deserialize::<R::Row>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut value = summary;
    value["rows"] = serde_json::to_value(rows)?;
    Ok(serde_json::from_value(value)?)
}

pub fn read_report<R: Report>(path: &Path, format: ReportFormat) -> Result<R> {
    match format {
        ReportFormat::Json => read_json_report(path),
        ReportFormat::Csv => read_csv_report(path),
    }
}
