//! Report assembly: pass/fail checks, per-sample rows, aggregates, canonical
//! JSON output, and CSV plot data.
//!
//! The JSON report is the contract surface of every run: it contains no
//! timestamps and no machine-dependent fields, so identical configuration
//! must reproduce it byte for byte regardless of worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ParamsEcho;

/// Version string recorded in report provenance.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One measured quantity compared against its declared target.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// The measured value (always finite; out-of-range raw values are
    /// clamped and noted).
    pub metric: f64,
    /// Human-readable description of the passing region.
    pub target: String,
    pub pass: bool,
    pub note: String,
}

/// Threshold formatting: exponent notation once plain decimal gets longer
/// than the number is worth.
fn fmt_threshold(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Check {
    fn build(name: &str, metric: f64, target: String, pass: bool) -> Self {
        let (metric, note) = if metric.is_finite() {
            (metric, String::new())
        } else {
            (1e300, format!("raw metric {metric} clamped"))
        };
        Check {
            name: name.to_string(),
            metric,
            target,
            pass,
            note,
        }
    }

    /// Passes when `metric <= threshold`.
    pub fn le(name: &str, metric: f64, threshold: f64) -> Self {
        Self::build(
            name,
            metric,
            format!("<= {}", fmt_threshold(threshold)),
            metric <= threshold,
        )
    }

    /// Passes when `metric < threshold`.
    pub fn lt(name: &str, metric: f64, threshold: f64) -> Self {
        Self::build(
            name,
            metric,
            format!("< {}", fmt_threshold(threshold)),
            metric < threshold,
        )
    }

    /// Passes when `metric >= threshold`.
    pub fn ge(name: &str, metric: f64, threshold: f64) -> Self {
        Self::build(
            name,
            metric,
            format!(">= {}", fmt_threshold(threshold)),
            metric >= threshold,
        )
    }

    /// Passes when `lo <= metric <= hi`.
    pub fn in_range(name: &str, metric: f64, lo: f64, hi: f64) -> Self {
        Self::build(
            name,
            metric,
            format!("in [{}, {}]", fmt_threshold(lo), fmt_threshold(hi)),
            lo <= metric && metric <= hi,
        )
    }

    /// Passes when `value` equals `expected` bit for bit; the metric records
    /// the absolute difference.
    pub fn exact(name: &str, value: f64, expected: f64) -> Self {
        Self::build(
            name,
            (value - expected).abs(),
            format!("== {expected} exactly"),
            value == expected,
        )
    }

    /// Always passes; records a measurement that has no gate.
    pub fn info(name: &str, metric: f64) -> Self {
        Self::build(name, metric, "informational".to_string(), true)
    }

    /// Appends explanatory text to the check.
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let extra = note.into();
        if self.note.is_empty() {
            self.note = extra;
        } else {
            self.note = format!("{}; {extra}", self.note);
        }
        self
    }
}

/// One acceptance criterion: a named group of checks.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub index: usize,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    pub fn new(index: usize, name: &str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        CriterionResult {
            index,
            name: name.to_string(),
            pass,
            checks,
        }
    }
}

/// Result of one Monte Carlo sample.  Failures are flagged rows, never
/// fatal for the batch.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub index: u64,
    pub ok: bool,
    pub value: Option<f64>,
    pub error: Option<String>,
}

impl SampleRow {
    pub fn ok(index: u64, value: f64) -> Self {
        SampleRow {
            index,
            ok: true,
            value: Some(value),
            error: None,
        }
    }

    pub fn failed(index: u64, error: String) -> Self {
        SampleRow {
            index,
            ok: false,
            value: None,
            error: Some(error),
        }
    }
}

/// Mean, median, and standard error over the successful samples.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// `s / √m` with the (m − 1)-denominator sample deviation; absent for a
    /// single sample.
    pub std_error: Option<f64>,
}

/// Median by total order; the even case averages the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Aggregates successful sample values; `None` when there are none.
pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    let std_error = if m >= 2 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        Some((var / m as f64).sqrt())
    } else {
        None
    };
    Some(Aggregate {
        count: m,
        mean,
        median: median(values),
        std_error,
    })
}

/// Where the numbers came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: &'static str,
}

/// The full JSON report for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub provenance: Provenance,
    /// Resolved parameters; absent for `accept-all`, whose parameters are
    /// frozen in code.
    pub params: Option<ParamsEcho>,
    /// Named predicted values the run compared against.
    pub predicted: BTreeMap<String, f64>,
    pub samples: Vec<SampleRow>,
    pub aggregate: Option<Aggregate>,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(command: &str, provenance: Provenance, params: Option<ParamsEcho>) -> Self {
        RunReport {
            command: command.to_string(),
            provenance,
            params,
            predicted: BTreeMap::new(),
            samples: Vec::new(),
            aggregate: None,
            criteria: Vec::new(),
            pass: true,
        }
    }

    /// Recomputes the overall verdict from the criteria.
    pub fn finish(&mut self) {
        self.pass = self.criteria.iter().all(|c| c.pass);
    }

    /// The canonical byte representation written to `report.json`.
    pub fn canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Writes `report.json` into `dir`, creating the directory if needed.
pub fn write_report(dir: &Path, report: &RunReport) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    std::fs::write(&path, report.canonical_json())?;
    Ok(path)
}

/// Prints the human-readable summary: one line per criterion, one indented
/// line per check.
pub fn print_human(report: &RunReport) {
    for c in &report.criteria {
        println!(
            "criterion {:>2} {:<26} {}",
            c.index,
            c.name,
            if c.pass { "PASS" } else { "FAIL" }
        );
        for ch in &c.checks {
            let verdict = if ch.pass { "pass" } else { "FAIL" };
            let mut line = format!(
                "    [{verdict}] {}: metric {:.6e}, target {}",
                ch.name, ch.metric, ch.target
            );
            if !ch.note.is_empty() {
                line.push_str(&format!(" ({})", ch.note));
            }
            println!("{line}");
        }
    }
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    println!(
        "overall: {} ({passed}/{} criteria)",
        if report.pass { "PASS" } else { "FAIL" },
        report.criteria.len()
    );
}

/// One row of decay-curve plot data (`decay` and `hermitian-decay`).
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: f64,
    pub empirical_mean: Option<f64>,
    pub empirical_stderr: Option<f64>,
    pub predicted: Option<f64>,
}

/// One row of autocorrelation plot data.
#[derive(Debug, Clone, Serialize)]
pub struct AutocorrRow {
    pub tau: f64,
    pub empirical: Option<f64>,
    pub predicted: f64,
    pub relative_error: Option<f64>,
}

fn csv_out<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    if rows.is_empty() {
        anyhow::bail!("no curve data");
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes decay plot data; refuses an empty series.
pub fn emit_decay_csv(path: &Path, rows: &[DecayRow]) -> anyhow::Result<()> {
    csv_out(path, rows)
}

/// Writes autocorrelation plot data; refuses an empty series.
pub fn emit_autocorr_csv(path: &Path, rows: &[AutocorrRow]) -> anyhow::Result<()> {
    csv_out(path, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors() {
        assert!(Check::le("a", 0.1, 0.2).pass);
        assert!(!Check::le("a", 0.3, 0.2).pass);
        assert!(Check::in_range("b", -0.5, -0.6, -0.4).pass);
        assert!(!Check::in_range("b", f64::NAN, -0.6, -0.4).pass);
        assert!(Check::exact("c", 0.625, 0.625).pass);
        assert!(!Check::exact("c", 0.625 + 1e-16, 0.625).pass);
        let clamped = Check::le("d", f64::INFINITY, 1.0);
        assert!(!clamped.pass);
        assert!(clamped.metric.is_finite());
        assert!(clamped.note.contains("clamped"));
    }

    #[test]
    fn aggregate_matches_hand_computation() {
        let agg = aggregate(&[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(agg.count, 4);
        assert_eq!(agg.mean, 2.5);
        assert_eq!(agg.median, 2.5);
        // sample variance of {1,2,3,4} is 5/3
        let expected = (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((agg.std_error.unwrap() - expected).abs() < 1e-15);
        assert!(aggregate(&[]).is_none());
        assert!(aggregate(&[7.0]).unwrap().std_error.is_none());
    }

    #[test]
    fn empty_series_is_refused() {
        let dir = std::env::temp_dir().join("randnet-report-test");
        let err = emit_decay_csv(&dir.join("x.csv"), &[]).unwrap_err();
        assert_eq!(err.to_string(), "no curve data");
    }

    #[test]
    fn csv_schema_headers() {
        let dir = std::env::temp_dir().join(format!("randnet-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("decay.csv");
        emit_decay_csv(
            &path,
            &[DecayRow {
                t: 1.0,
                empirical_mean: Some(0.5),
                empirical_stderr: None,
                predicted: Some(0.49),
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,empirical_mean,empirical_stderr,predicted"
        );
        assert_eq!(lines.next().unwrap(), "1.0,0.5,,0.49");

        let path = dir.join("autocorr.csv");
        emit_autocorr_csv(
            &path,
            &[AutocorrRow {
                tau: 0.0,
                empirical: Some(0.6),
                predicted: 0.625,
                relative_error: Some(0.04),
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "tau,empirical,predicted,relative_error"
        );
        std::fs::remove_dir_all(&dir).ok();
    }
}
