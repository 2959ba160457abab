//! Confusion matrices, the four headline metrics, and multi-model comparison.
//!
//! Real news (label 1) is the positive class. Precision, recall and F1 are
//! defined as 0 whenever their denominator is 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no predictions to evaluate")]
    EmptyInput,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The matrix obtained by swapping truth and prediction.
    pub fn transpose(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tn,
        }
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (Label::Real, Label::Real) => cm.tp += 1,
            (Label::Fake, Label::Real) => cm.fp += 1,
            (Label::Real, Label::Fake) => cm.fn_ += 1,
            (Label::Fake, Label::Fake) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    })
}

/// One row of the comparison: a model's test-set metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    /// Wall-clock seconds spent training and predicting.
    pub wall_time: f64,
}

impl MetricsReport {
    pub fn new(model_name: impl Into<String>, confusion: ConfusionMatrix, wall_time: f64) -> Result<Self, EvalError> {
        let m = metrics(&confusion)?;
        Ok(MetricsReport {
            model_name: model_name.into(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            confusion,
            wall_time,
        })
    }

    pub fn evaluate(
        model_name: impl Into<String>,
        y_true: &[Label],
        y_pred: &[Label],
        wall_time: f64,
    ) -> Result<Self, EvalError> {
        MetricsReport::new(model_name, confusion(y_true, y_pred)?, wall_time)
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1];

    pub fn header(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::F1 => "f1-score",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub report: MetricsReport,
    /// Best-in-column flags, in [`Metric::ALL`] order.
    pub best: [bool; 4],
}

/// Reports ordered by accuracy (descending, ties by name).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(reports: &[MetricsReport]) -> ComparisonTable {
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.model_name.cmp(&b.model_name)));
    let best: Vec<f64> = Metric::ALL
        .iter()
        .map(|&m| sorted.iter().map(|r| r.metric(m)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let rows = sorted
        .into_iter()
        .map(|report| {
            let mut flags = [false; 4];
            for (k, &m) in Metric::ALL.iter().enumerate() {
                flags[k] = report.metric(m) == best[k];
            }
            ComparisonRow { report, best: flags }
        })
        .collect();
    ComparisonTable { rows }
}

pub fn percent(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

impl ComparisonTable {
    /// Aligned plain text; `*` marks the best value in each column.
    pub fn to_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.report.model_name.len())
            .chain(std::iter::once("Model".len()))
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "Model");
        for m in Metric::ALL {
            let _ = write!(out, "  {:>10}", m.header());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<name_w$}", row.report.model_name);
            for (k, m) in Metric::ALL.iter().enumerate() {
                let mark = if row.best[k] { "*" } else { " " };
                let _ = write!(out, "  {:>9}{mark}", percent(row.report.metric(*m)));
            }
            out.push('\n');
        }
        out
    }

    /// Markdown table with columns Model|Accuracy|Precision|Recall|f1-score;
    /// best values in bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | Accuracy | Precision | Recall | f1-score |\n");
        out.push_str("|---|---:|---:|---:|---:|\n");
        for row in &self.rows {
            let _ = write!(out, "| {} |", row.report.model_name);
            for (k, m) in Metric::ALL.iter().enumerate() {
                let v = percent(row.report.metric(*m));
                if row.best[k] {
                    let _ = write!(out, " **{v}** |");
                } else {
                    let _ = write!(out, " {v} |");
                }
            }
            out.push('\n');
        }
        out
    }
}
