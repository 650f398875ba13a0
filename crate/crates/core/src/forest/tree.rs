//! CART classification trees with Gini impurity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, label_of, normalized, ForestError, Hyperparams, Prediction};
use crate::encoder::NUM_FEATURES;
use crate::level::{Level, NUM_CLASSES};
use crate::preprocess::FeatureRow;

/// A node of a flattened tree. Children always sit after their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    /// Rows with `features[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: [u32; NUM_CLASSES],
        prediction: Level,
    },
}

/// Gini impurity `1 - sum(p_i^2)` of a class histogram.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// `n * gini`, the additive form used to compare splits.
fn unnormalized_gini(counts: &[u32; NUM_CLASSES], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: u64 = counts.iter().map(|&c| c as u64 * c as u64).sum();
    n as f64 - sq as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, ForestError> {
        let tree = DecisionTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.nodes.is_empty() {
            return Err(ForestError::ModelNotTrained);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = *node
            {
                let n = self.nodes.len();
                if feature >= NUM_FEATURES || !threshold.is_finite() || left <= i || right <= i || left >= n || right >= n {
                    return Err(ForestError::InvalidParams(format!("corrupt tree node {i}")));
                }
            }
        }
        Ok(())
    }

    fn leaf_for(&self, features: &FeatureRow) -> Result<(&[u32; NUM_CLASSES], Level), ForestError> {
        let mut i = 0;
        loop {
            match self.nodes.get(i).ok_or(ForestError::ModelNotTrained)? {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if features[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf {
                    class_counts,
                    prediction,
                } => return Ok((class_counts, *prediction)),
            }
        }
    }

    pub fn predict(&self, features: &FeatureRow) -> Result<Prediction, ForestError> {
        let (counts, label) = self.leaf_for(features)?;
        Ok(Prediction {
            label,
            probs: normalized(counts),
        })
    }

    pub fn predict_label(&self, features: &FeatureRow) -> Result<Level, ForestError> {
        self.leaf_for(features).map(|(_, l)| l)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a [FeatureRow],
    y: &'a [Level],
    params: &'a Hyperparams,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> [u32; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for &r in rows {
            c[self.y[r].index()] += 1;
        }
        c
    }

    fn best_split_on(&mut self, feature: usize, rows: &[usize], total: &[u32; NUM_CLASSES]) -> Option<Split> {
        self.scratch.clear();
        self.scratch
            .extend(rows.iter().map(|&r| (self.x[r][feature], self.y[r].index())));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = rows.len() as u32;
        let mut left = [0u32; NUM_CLASSES];
        let mut best: Option<Split> = None;
        for j in 0..self.scratch.len() - 1 {
            let (v, class) = self.scratch[j];
            left[class] += 1;
            let next = self.scratch[j + 1].0;
            if v == next {
                continue;
            }
            let n_left = j as u32 + 1;
            let mut right = *total;
            for k in 0..NUM_CLASSES {
                right[k] -= left[k];
            }
            let score = unnormalized_gini(&left, n_left) + unnormalized_gini(&right, n - n_left);
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn choose_split(&mut self, rows: &[usize], total: &[u32; NUM_CLASSES]) -> Option<Split> {
        let mut order: Vec<usize> = (0..NUM_FEATURES).collect();
        let limit = self.params.max_features.min(NUM_FEATURES);
        if limit < NUM_FEATURES {
            order.shuffle(&mut self.rng);
        }
        let mut best: Option<Split> = None;
        for (visited, &f) in order.iter().enumerate() {
            // Keep drawing past the limit only while nothing splittable was found.
            if visited >= limit && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(f, rows, total) {
                if best.as_ref().is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(rows);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class_counts: counts,
            prediction: label_of(&counts),
        });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < self.params.min_samples_split {
            return id;
        }
        let Some(split) = self.choose_split(rows, &counts) else {
            return id;
        };

        let x = self.x;
        let mut mid = 0;
        for i in 0..rows.len() {
            if x[rows[i]][split.feature] <= split.threshold {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Trains on the given row multiset (indices into `x`, repeats allowed).
pub(crate) fn train_on_rows(
    x: &[FeatureRow],
    y: &[Level],
    mut rows: Vec<usize>,
    params: &Hyperparams,
    seed: u64,
) -> DecisionTree {
    let mut b = Builder {
        x,
        y,
        params,
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    b.build(&mut rows, 0);
    DecisionTree { nodes: b.nodes }
}

/// Grows one tree on all rows. `params.seed` drives feature subsampling.
pub fn train_tree(x: &[FeatureRow], y: &[Level], params: &Hyperparams) -> Result<DecisionTree, ForestError> {
    check_training_set(x, y)?;
    params.validate()?;
    Ok(train_on_rows(x, y, (0..x.len()).collect(), params, params.seed))
}

/// Bootstrap resample of `n` row indices.
pub(crate) fn bootstrap_rows(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
