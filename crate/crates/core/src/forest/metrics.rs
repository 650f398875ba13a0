//! Confusion matrix, accuracy and per-class precision/recall/F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Classifier, ForestError};
use crate::level::{Level, NUM_CLASSES};
use crate::preprocess::FeatureRow;

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: [ClassMetrics; NUM_CLASSES],
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_pairs(truth: &[Level], predicted: &[Level]) -> Result<Metrics, ForestError> {
        if truth.is_empty() {
            return Err(ForestError::EmptyDataset);
        }
        if truth.len() != predicted.len() {
            return Err(ForestError::LengthMismatch {
                rows: predicted.len(),
                labels: truth.len(),
            });
        }
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        Ok(Metrics::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: [[usize; NUM_CLASSES]; NUM_CLASSES]) -> Metrics {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
        let per_class = std::array::from_fn(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
            }
        });
        Metrics {
            accuracy: ratio(correct, total),
            per_class,
            confusion,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Plain-text class-wise table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10}{:>11}{:>9}{:>10}{:>9}", "Class", "Precision", "Recall", "F1-Score", "Support");
        for l in Level::ALL {
            let m = &self.per_class[l.index()];
            let _ = writeln!(
                out,
                "{:<10}{:>11.3}{:>9.3}{:>10.3}{:>9}",
                l.to_string(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        let _ = writeln!(out, "Accuracy: {:.2}% ({} rows)", self.accuracy * 100.0, self.total());
        out
    }
}

pub fn evaluate(model: &Classifier, x: &[FeatureRow], y: &[Level]) -> Result<Metrics, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let predicted = x.iter().map(|r| model.predict_label(r)).collect::<Result<Vec<_>, _>>()?;
    Metrics::from_pairs(y, &predicted)
}
