//! Bagged random forests.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{bootstrap_rows, train_on_rows};
use super::{check_training_set, label_of, normalized, DecisionTree, ForestError, Hyperparams, Prediction};
use crate::level::{Level, NUM_CLASSES};
use crate::preprocess::FeatureRow;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub params: Hyperparams,
}

impl RandomForest {
    pub fn votes(&self, features: &FeatureRow) -> Result<[u32; NUM_CLASSES], ForestError> {
        if self.trees.is_empty() {
            return Err(ForestError::ModelNotTrained);
        }
        let mut votes = [0u32; NUM_CLASSES];
        for t in &self.trees {
            votes[t.predict_label(features)?.index()] += 1;
        }
        Ok(votes)
    }

    /// Majority vote; probabilities are vote fractions.
    pub fn predict(&self, features: &FeatureRow) -> Result<Prediction, ForestError> {
        let votes = self.votes(features)?;
        Ok(Prediction {
            label: label_of(&votes),
            probs: normalized(&votes),
        })
    }
}

/// Per-tree seeds drawn up front from the master seed, so parallel and
/// serial training agree.
fn tree_seeds(master: u64, n: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| (rng.next_u64(), rng.next_u64())).collect()
}

pub fn train_forest(x: &[FeatureRow], y: &[Level], params: &Hyperparams) -> Result<RandomForest, ForestError> {
    check_training_set(x, y)?;
    params.validate()?;
    let trees = tree_seeds(params.seed, params.n_trees)
        .into_par_iter()
        .map(|(sample_seed, split_seed)| {
            let rows = if params.bootstrap {
                bootstrap_rows(x.len(), &mut ChaCha8Rng::seed_from_u64(sample_seed))
            } else {
                (0..x.len()).collect()
            };
            train_on_rows(x, y, rows, params, split_seed)
        })
        .collect();
    Ok(RandomForest {
        trees,
        params: params.clone(),
    })
}
