//! Four-class classifiers trained from scratch: CART decision trees, bagged
//! random forests and a multinomial logistic baseline, with stratified
//! K-fold cross-validation, grid search and per-class metrics.

pub mod cv;
pub mod ensemble;
pub mod logistic;
pub mod metrics;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::NUM_FEATURES;
use crate::level::{argmax_lowest, LabelOutOfRange, Level, NUM_CLASSES};
use crate::preprocess::FeatureRow;

pub use cv::{grid_search, kfold_cv, stratified_split, CvReport, GridReport, Learner};
pub use ensemble::{train_forest, RandomForest};
pub use logistic::{train_logistic, LogisticModel, LogisticParams};
pub use metrics::{evaluate, f1_score, ClassMetrics, Metrics};
pub use tree::{gini, train_tree, DecisionTree, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    LabelOutOfRange(#[from] LabelOutOfRange),
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("model has not been trained")]
    ModelNotTrained,
    #[error("{rows} rows cannot be split into {k} folds")]
    TooFewRows { rows: usize, k: usize },
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("grid is empty")]
    EmptyGrid,
}

/// Tree and forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// `None` grows until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: default_max_features(),
            bootstrap: true,
            seed: 0,
        }
    }
}

/// floor(sqrt(15)) = 3.
pub fn default_max_features() -> usize {
    (NUM_FEATURES as f64).sqrt().floor() as usize
}

impl Hyperparams {
    /// Settings for a single deterministic tree over all features.
    pub fn single_tree() -> Self {
        Hyperparams {
            n_trees: 1,
            max_features: NUM_FEATURES,
            bootstrap: false,
            ..Hyperparams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidParams("min_samples_split must be >= 2".into()));
        }
        if self.max_features == 0 {
            return Err(ForestError::InvalidParams("max_features must be >= 1".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let depth = self.max_depth.map_or_else(|| "none".to_string(), |d| d.to_string());
        format!(
            "n_trees={} max_depth={} min_samples_split={} max_features={}",
            self.n_trees, depth, self.min_samples_split, self.max_features
        )
    }
}

/// The default forest grid: n_trees x max_depth x min_samples_split.
pub fn default_grid(seed: u64) -> Vec<Hyperparams> {
    let mut grid = Vec::new();
    for n_trees in [50, 100, 200] {
        for max_depth in [Some(3), Some(5), None] {
            for min_samples_split in [2, 5] {
                grid.push(Hyperparams {
                    n_trees,
                    max_depth,
                    min_samples_split,
                    seed,
                    ..Hyperparams::default()
                });
            }
        }
    }
    grid
}

/// A trained classifier of any supported kind.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Classifier {
    Tree(DecisionTree),
    Forest(RandomForest),
    Logistic(LogisticModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Level,
    pub probs: [f64; NUM_CLASSES],
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Tree(_) => "tree",
            Classifier::Forest(_) => "forest",
            Classifier::Logistic(_) => "logistic",
        }
    }

    pub fn predict(&self, features: &FeatureRow) -> Result<Prediction, ForestError> {
        match self {
            Classifier::Tree(t) => t.predict(features),
            Classifier::Forest(f) => f.predict(features),
            Classifier::Logistic(m) => Ok(m.predict(features)),
        }
    }

    pub fn predict_label(&self, features: &FeatureRow) -> Result<Level, ForestError> {
        self.predict(features).map(|p| p.label)
    }
}

pub(crate) fn check_training_set(x: &[FeatureRow], y: &[Level]) -> Result<(), ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    for (row, r) in x.iter().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ForestError::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

/// Converts raw integer labels, rejecting anything outside 1..=4.
pub fn labels_from_raw(raw: &[i64]) -> Result<Vec<Level>, ForestError> {
    raw.iter().map(|&v| Level::try_from(v).map_err(ForestError::from)).collect()
}

pub(crate) fn normalized(counts: &[u32; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return [1.0 / NUM_CLASSES as f64; NUM_CLASSES];
    }
    counts.map(|c| c as f64 / total as f64)
}

pub(crate) fn label_of(counts: &[u32; NUM_CLASSES]) -> Level {
    Level::from_index(argmax_lowest(counts))
}
