use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::EvalReport;
use super::score::{rank_features, RankedFeature};
use crate::error::{Error, Result};
use crate::tensorio::io::write_json;

/// How many top-scoring frequency channels the summary lists.
pub const TOP_FEATURES: usize = 15;

#[derive(Debug, Serialize)]
struct PairRow<'a> {
    id_a: &'a str,
    id_b: &'a str,
    corr_matched: f64,
    corr_swapped: f64,
    correct: bool,
}

/// JSON summary of one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub lag_ms: f64,
    pub lag_bins: usize,
    pub n_pairs: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub item_accuracy: BTreeMap<String, f64>,
    pub center_freqs_hz: Vec<f64>,
    /// Per-frequency variance explained; `null` where undefined.
    pub feature_scores: Vec<Option<f64>>,
    pub top_features: Vec<RankedFeature>,
}

impl EvalSummary {
    pub fn from_report(report: &EvalReport) -> Result<Self> {
        let scores = &report.feature_scores.per_frequency;
        let k = TOP_FEATURES.min(scores.len());
        Ok(EvalSummary {
            lag_ms: report.lag.lag_ms,
            lag_bins: report.lag.lag_bins,
            n_pairs: report.n_pairs,
            n_correct: report.n_correct,
            accuracy: report.accuracy,
            item_accuracy: report.item_accuracy.clone(),
            center_freqs_hz: report.center_freqs_hz.clone(),
            feature_scores: scores.clone(),
            top_features: rank_features(scores, &report.center_freqs_hz, k)?,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Manifest(format!("{}: {other:?}", path.display())),
    }
}

/// One row per pair: id_a, id_b, corr_matched, corr_swapped, correct.
pub fn write_pairs_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in &report.pair_results {
        w.serialize(PairRow {
            id_a: &r.id_a,
            id_b: &r.id_b,
            corr_matched: r.corr_matched,
            corr_swapped: r.corr_swapped,
            correct: r.correct,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_json(report: &EvalReport, path: &Path) -> Result<()> {
    write_json(path, &EvalSummary::from_report(report)?)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    lag_ms: f64,
    lag_bins: usize,
    n_pairs: usize,
    n_correct: usize,
    accuracy: f64,
}

/// Accuracy-vs-lag table, one row per report.
pub fn write_sweep_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in reports {
        w.serialize(SweepRow {
            lag_ms: r.lag.lag_ms,
            lag_bins: r.lag.lag_bins,
            n_pairs: r.n_pairs,
            n_correct: r.n_correct,
            accuracy: r.accuracy,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Whitespace-separated `lag_ms accuracy` columns for gnuplot.
pub fn write_gnuplot(reports: &[EvalReport], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("# lag_ms accuracy n_pairs\n");
    for r in reports {
        body.push_str(&format!("{} {} {}\n", r.lag.lag_ms, r.accuracy, r.n_pairs));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
