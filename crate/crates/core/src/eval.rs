//! Binary detection metrics at row granularity.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {predicted} predictions vs {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("empty label set")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Fraction of rows labeled anomalous.
    pub positive_rate: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1: f1_score(precision, recall),
            positive_rate: ratio(tp + fn_, tp + fp + fn_ + tn),
        }
    }

    /// Flat `key=value` lines for scripting.
    pub fn write_kv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f1={:.6}", self.f1)?;
        writeln!(w, "precision={:.6}", self.precision)?;
        writeln!(w, "recall={:.6}", self.recall)?;
        writeln!(w, "tp={}", self.tp)?;
        writeln!(w, "fp={}", self.fp)?;
        writeln!(w, "fn={}", self.fn_)?;
        writeln!(w, "tn={}", self.tn)?;
        writeln!(w, "positive_rate={:.6}", self.positive_rate)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F1         {:.5}", self.f1)?;
        writeln!(f, "precision  {:.5}", self.precision)?;
        writeln!(f, "recall     {:.5}", self.recall)?;
        write!(
            f,
            "tp={} fp={} fn={} tn={} (positive rate {:.5})",
            self.tp, self.fp, self.fn_, self.tn, self.positive_rate
        )
    }
}

/// Confusion counts and derived metrics; any nonzero value is positive.
pub fn compute_metrics(predicted: &[u8], actual: &[u8]) -> Result<MetricsReport, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p != 0, a != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}

/// Metrics of predicting every row anomalous.
pub fn baseline_all_anomalous(actual: &[u8]) -> Result<MetricsReport, EvalError> {
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    compute_metrics(&vec![1; actual.len()], actual)
}
