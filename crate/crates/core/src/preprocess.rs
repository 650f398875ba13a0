//! Row filtering, masked statistics, mean imputation and standard scaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{PoseEncoding, NUM_FEATURES};
use crate::level::Level;

/// Scaled feature vector fed to classifiers.
pub type FeatureRow = [f64; NUM_FEATURES];

/// Rows with at least this many invalid entries (more than half of 15) are
/// dropped before fitting.
pub const MAX_INVALID_EXCLUSIVE: usize = NUM_FEATURES / 2 + 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledRow {
    pub encoding: PoseEncoding,
    pub label: Level,
}

/// Labeled encodings plus the number of rows removed by filtering so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    pub dropped: usize,
}

impl LabeledDataset {
    pub fn new(rows: Vec<LabeledRow>) -> Self {
        LabeledDataset { rows, dropped: 0 }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<Level> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Subset by row indices, keeping the drop count.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            dropped: self.dropped,
        }
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for r in &self.rows {
            counts[r.label.index()] += 1;
        }
        counts
    }
}

pub fn keeps_row(encoding: &PoseEncoding) -> bool {
    encoding.invalid_count() < MAX_INVALID_EXCLUSIVE
}

/// Drops rows in which more than half of the entries are invalid.
pub fn filter_rows(ds: &LabeledDataset) -> LabeledDataset {
    let rows: Vec<LabeledRow> = ds.rows.iter().copied().filter(|r| keeps_row(&r.encoding)).collect();
    let dropped = ds.dropped + (ds.rows.len() - rows.len());
    LabeledDataset { rows, dropped }
}

/// Training-time per-feature statistics used to impute and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
    pub rows_used: usize,
    pub rows_dropped: usize,
    /// Features whose std was replaced by 1.0 (no valid entries or zero
    /// variance).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
}

impl PreprocessStats {
    /// Stats that leave values unscaled.
    pub fn identity() -> Self {
        PreprocessStats {
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
            rows_used: 0,
            rows_dropped: 0,
            flagged: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

/// Per-feature mean and population std over valid entries only.
pub fn fit(ds: &LabeledDataset) -> Result<PreprocessStats, PreprocessError> {
    fit_encodings(ds.rows.iter().map(|r| &r.encoding), ds.dropped)
}

pub fn fit_encodings<'a>(
    encodings: impl Iterator<Item = &'a PoseEncoding> + Clone,
    rows_dropped: usize,
) -> Result<PreprocessStats, PreprocessError> {
    let rows_used = encodings.clone().count();
    if rows_used == 0 {
        return Err(PreprocessError::EmptyDataset);
    }
    let mut mean = [0.0; NUM_FEATURES];
    let mut std = [1.0; NUM_FEATURES];
    let mut flagged = Vec::new();
    for i in 0..NUM_FEATURES {
        let valid = || encodings.clone().filter_map(|e| e.get(i));
        let n = valid().count();
        if n == 0 {
            flagged.push(i);
            continue;
        }
        let m = valid().sum::<f64>() / n as f64;
        let var = valid().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        mean[i] = m;
        if s > 1e-12 && s.is_finite() {
            std[i] = s;
        } else {
            flagged.push(i);
        }
    }
    Ok(PreprocessStats {
        mean,
        std,
        rows_used,
        rows_dropped,
        flagged,
    })
}

/// Imputes invalid entries with the feature mean, then z-scores. Imputed
/// entries come out as exactly zero.
pub fn transform(enc: &PoseEncoding, stats: &PreprocessStats) -> FeatureRow {
    std::array::from_fn(|i| match enc.get(i) {
        Some(v) => (v - stats.mean[i]) / stats.std[i],
        None => 0.0,
    })
}

pub fn transform_all(ds: &LabeledDataset, stats: &PreprocessStats) -> (Vec<FeatureRow>, Vec<Level>) {
    ds.rows
        .iter()
        .map(|r| (transform(&r.encoding, stats), r.label))
        .unzip()
}
