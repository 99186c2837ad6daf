//! Result serialization: atomic file writes, CSV/JSON emitters with
//! round-trip-safe number formatting, and the reproducibility manifest
//! written next to every result file.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::montecarlo::{ExperimentConfig, QRangeCdf, SweepResult};

/// Metadata written next to every result file.
///
/// `command` holds the subcommand plus any flags that are not part of the
/// experiment config (e.g. `sweep --param alpha --points 0.05:1.0:0.05`);
/// together with `config` and `seed` it reproduces the result bit-exactly:
/// `ripsim <command> --config <manifest> --out <path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand invocation, minus --out/--config/--format/--threads.
    pub command: String,
    /// Version of the binary that produced the outputs.
    pub version: String,
    /// Base RNG seed (duplicated from `config` for quick inspection).
    pub seed: u64,
    /// Fully resolved experiment configuration after flag/file merging.
    pub config: ExperimentConfig,
    /// Files the run wrote.
    pub outputs: Vec<PathBuf>,
    /// Wall-clock runtime in seconds. Informational only: it varies between
    /// otherwise identical runs, so manifests are not byte-reproducible
    /// even though result files are.
    pub duration_seconds: f64,
}

impl RunManifest {
    /// Pretty-printed JSON document, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Path of the manifest written next to a result file: `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `contents` to `path` atomically: a sibling temp file is written
/// first and renamed over the target, so interrupted runs never leave a
/// truncated result behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let file_name = path.file_name().ok_or_else(|| {
        io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("not a writable file path: {}", path.display()),
        )
    })?;
    let mut tmp_name = file_name.to_owned();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// One frequency step of the demo command's output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub k: usize,
    pub f_hz: f64,
    /// Wrapped deviation of the measured phase from the LOS truth.
    pub phase_error_true_rad: f64,
    /// Same deviation after subtracting the estimated multipath error.
    pub phase_error_corrected_rad: f64,
}

/// CSV for the demo command (header + one row per frequency step).
pub fn demo_csv(rows: &[DemoRow]) -> String {
    let mut out = String::from("k,f_hz,phase_error_true_rad,phase_error_corrected_rad\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.k, r.f_hz, r.phase_error_true_rad, r.phase_error_corrected_rad
        );
    }
    out
}

/// JSON array form of the demo output.
pub fn demo_json(rows: &[DemoRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SweepRow {
    sweep_value: f64,
    rmse_free_rad: f64,
    rmse_distorted_rad: f64,
    rmse_corrected_rad: f64,
    trials: usize,
}

fn sweep_rows(result: &SweepResult) -> Vec<SweepRow> {
    (0..result.sweep_values.len())
        .map(|i| SweepRow {
            sweep_value: result.sweep_values[i],
            rmse_free_rad: result.rmse_free[i],
            rmse_distorted_rad: result.rmse_distorted[i],
            rmse_corrected_rad: result.rmse_corrected[i],
            trials: result.trials_per_point,
        })
        .collect()
}

/// CSV for the sweep command (one row per sweep point).
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out =
        String::from("sweep_value,rmse_free_rad,rmse_distorted_rad,rmse_corrected_rad,trials\n");
    for r in sweep_rows(result) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sweep_value, r.rmse_free_rad, r.rmse_distorted_rad, r.rmse_corrected_rad, r.trials
        );
    }
    out
}

/// JSON array form of the sweep output.
pub fn sweep_json(result: &SweepResult) -> String {
    let mut s = serde_json::to_string_pretty(&sweep_rows(result)).expect("rows serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CdfRow {
    error_m_distorted: f64,
    error_m_corrected: f64,
}

/// Percentile summary of a q-range CDF run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfSummary {
    pub median_distorted_m: f64,
    pub p95_distorted_m: f64,
    pub median_corrected_m: f64,
    pub p95_corrected_m: f64,
}

impl CdfSummary {
    pub fn of(cdf: &QRangeCdf) -> Self {
        CdfSummary {
            median_distorted_m: cdf.median_distorted,
            p95_distorted_m: cdf.p95_distorted,
            median_corrected_m: cdf.median_corrected,
            p95_corrected_m: cdf.p95_corrected,
        }
    }
}

/// CSV for the q-range CDF command: row r holds the r-th smallest error of
/// each series (the two columns are sorted independently).
pub fn cdf_csv(cdf: &QRangeCdf) -> String {
    let mut out = String::from("error_m_distorted,error_m_corrected\n");
    for (d, c) in cdf.errors_distorted.iter().zip(&cdf.errors_corrected) {
        let _ = writeln!(out, "{d},{c}");
    }
    out
}

/// JSON form of the CDF output: `{ "rows": [...], "summary": {...} }`.
pub fn cdf_json(cdf: &QRangeCdf) -> String {
    #[derive(Serialize)]
    struct CdfJson {
        rows: Vec<CdfRow>,
        summary: CdfSummary,
    }
    let doc = CdfJson {
        rows: cdf
            .errors_distorted
            .iter()
            .zip(&cdf.errors_corrected)
            .map(|(&d, &c)| CdfRow {
                error_m_distorted: d,
                error_m_corrected: c,
            })
            .collect(),
        summary: CdfSummary::of(cdf),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("rows serialize");
    s.push('\n');
    s
}
