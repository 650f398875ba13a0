//! Stratified K-fold cross-validation and exhaustive grid search.
//!
//! Preprocessing statistics are refitted on the training folds of every
//! split, so held-out rows never leak into imputation or scaling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, train_forest, train_logistic, train_tree, Classifier, ForestError, Hyperparams, LogisticParams,
};
use crate::level::{Level, NUM_CLASSES};
use crate::preprocess::{self, FeatureRow, LabeledDataset, PreprocessError};

/// A classifier family plus its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Learner {
    Tree(Hyperparams),
    Forest(Hyperparams),
    Logistic(LogisticParams),
}

impl Learner {
    pub fn fit(&self, x: &[FeatureRow], y: &[Level]) -> Result<Classifier, ForestError> {
        Ok(match self {
            Learner::Tree(p) => Classifier::Tree(train_tree(x, y, p)?),
            Learner::Forest(p) => Classifier::Forest(train_forest(x, y, p)?),
            Learner::Logistic(p) => Classifier::Logistic(train_logistic(x, y, p)?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Learner::Tree(_) => "tree",
            Learner::Forest(_) => "forest",
            Learner::Logistic(_) => "logistic",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Learner::Tree(p) | Learner::Forest(p) => format!("{} {}", self.kind(), p.describe()),
            Learner::Logistic(p) => format!(
                "logistic step={} iterations={} l2={}",
                p.step_size, p.iterations, p.l2
            ),
        }
    }
}

impl From<PreprocessError> for ForestError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::EmptyDataset => ForestError::EmptyDataset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Shuffled row indices of each class, concatenated lowest class first.
fn class_ordered_indices(labels: &[Level], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(labels.len());
    for class in Level::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        out.extend(idx);
    }
    out
}

/// Fold id of every row. Dealing the class-ordered sequence round-robin
/// keeps every class within one row of its proportional share per fold and
/// fold sizes within one of each other.
pub fn stratified_folds(labels: &[Level], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    for (pos, i) in class_ordered_indices(labels, seed).into_iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

fn check_folds(n: usize, k: usize) -> Result<(), ForestError> {
    if k < 2 || n < k {
        return Err(ForestError::TooFewRows { rows: n, k });
    }
    Ok(())
}

fn run_fold(ds: &LabeledDataset, fold: &[usize], f: usize, learner: &Learner) -> Result<(usize, f64), ForestError> {
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| fold[i] != f);
    let train = ds.select(&train_idx);
    let test = ds.select(&test_idx);
    let stats = preprocess::fit(&train)?;
    let (xtr, ytr) = preprocess::transform_all(&train, &stats);
    let (xte, yte) = preprocess::transform_all(&test, &stats);
    let model = learner.fit(&xtr, &ytr)?;
    Ok((test.len(), evaluate(&model, &xte, &yte)?.accuracy))
}

/// Stratified K-fold CV; fold assignment is shuffled by `seed`.
pub fn kfold_cv(ds: &LabeledDataset, k: usize, learner: &Learner, seed: u64) -> Result<CvReport, ForestError> {
    check_folds(ds.len(), k)?;
    let fold = stratified_folds(&ds.labels(), k, seed);
    let results = (0..k)
        .into_par_iter()
        .map(|f| run_fold(ds, &fold, f, learner))
        .collect::<Result<Vec<_>, _>>()?;
    let (fold_sizes, fold_accuracies): (Vec<usize>, Vec<f64>) = results.into_iter().unzip();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        k,
        fold_sizes,
        fold_accuracies,
        mean_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub learner: Learner,
    pub cv: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub best_index: usize,
}

impl GridReport {
    pub fn best(&self) -> &GridRow {
        &self.rows[self.best_index]
    }
}

/// Cross-validates every grid point on the same folds and picks the highest
/// mean accuracy; ties go to the earliest point.
pub fn grid_search(ds: &LabeledDataset, grid: &[Learner], k: usize, seed: u64) -> Result<GridReport, ForestError> {
    if grid.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    check_folds(ds.len(), k)?;
    let reports = grid
        .par_iter()
        .map(|l| kfold_cv(ds, k, l, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best_index = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.mean_accuracy > reports[best_index].mean_accuracy {
            best_index = i;
        }
    }
    let rows = grid
        .iter()
        .cloned()
        .zip(reports)
        .map(|(learner, cv)| GridRow { learner, cv })
        .collect();
    Ok(GridReport { rows, best_index })
}

/// Per-class hold-out split. Returns (train, test) with original row order
/// preserved inside each part.
pub fn stratified_split(ds: &LabeledDataset, test_fraction: f64, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    for class in Level::ALL {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.rows[i].label == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_test = if n > 1 {
            ((n as f64 * test_fraction).round() as usize).min(n - 1)
        } else {
            0
        };
        test.extend_from_slice(&idx[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; ds.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| !is_test[i]).collect();
    (ds.select(&train), ds.select(&test))
}

/// Per-class row counts of each fold.
pub fn fold_class_counts(labels: &[Level], fold: &[usize], k: usize) -> Vec<[usize; NUM_CLASSES]> {
    let mut counts = vec![[0; NUM_CLASSES]; k];
    for (l, &f) in labels.iter().zip(fold) {
        counts[f][l.index()] += 1;
    }
    counts
}
