//! Multinomial logistic regression fitted by batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{check_training_set, ForestError, Prediction};
use crate::encoder::NUM_FEATURES;
use crate::level::{argmax_lowest, Level, NUM_CLASSES};
use crate::preprocess::FeatureRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub step_size: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            step_size: 0.1,
            iterations: 500,
            l2: 1e-3,
        }
    }
}

/// Per-class weight rows; the bias is not penalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticModel {
    pub weights: [[f64; NUM_FEATURES]; NUM_CLASSES],
    pub bias: [f64; NUM_CLASSES],
}

pub(crate) fn softmax(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

impl LogisticModel {
    pub fn zeros() -> Self {
        LogisticModel {
            weights: [[0.0; NUM_FEATURES]; NUM_CLASSES],
            bias: [0.0; NUM_CLASSES],
        }
    }

    pub fn scores(&self, x: &FeatureRow) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|c| self.bias[c] + self.weights[c].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    pub fn probabilities(&self, x: &FeatureRow) -> [f64; NUM_CLASSES] {
        softmax(self.scores(x))
    }

    pub fn predict(&self, x: &FeatureRow) -> Prediction {
        let probs = self.probabilities(x);
        Prediction {
            label: Level::from_index(argmax_lowest(&probs)),
            probs,
        }
    }

    /// Mean cross-entropy plus `l2/2 * ||W||^2`.
    pub fn loss(&self, x: &[FeatureRow], y: &[Level], l2: f64) -> f64 {
        let ce: f64 = x
            .iter()
            .zip(y)
            .map(|(r, l)| -self.probabilities(r)[l.index()].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / x.len() as f64;
        let penalty: f64 = self.weights.iter().flatten().map(|w| w * w).sum();
        ce + 0.5 * l2 * penalty
    }

    /// Gradient of [`loss`](Self::loss) with respect to weights and bias.
    #[allow(clippy::needless_range_loop)]
    pub fn gradient(&self, x: &[FeatureRow], y: &[Level], l2: f64) -> LogisticModel {
        let mut g = LogisticModel::zeros();
        let n = x.len() as f64;
        for (r, l) in x.iter().zip(y) {
            let p = self.probabilities(r);
            for c in 0..NUM_CLASSES {
                let err = p[c] - if l.index() == c { 1.0 } else { 0.0 };
                g.bias[c] += err / n;
                for j in 0..NUM_FEATURES {
                    g.weights[c][j] += err * r[j] / n;
                }
            }
        }
        for c in 0..NUM_CLASSES {
            for j in 0..NUM_FEATURES {
                g.weights[c][j] += l2 * self.weights[c][j];
            }
        }
        g
    }

    fn step(&mut self, grad: &LogisticModel, eta: f64) {
        for c in 0..NUM_CLASSES {
            self.bias[c] -= eta * grad.bias[c];
            for j in 0..NUM_FEATURES {
                self.weights[c][j] -= eta * grad.weights[c][j];
            }
        }
    }

    /// Rows of `[w_0 .. w_14, bias]`, one per class.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..NUM_CLASSES)
            .map(|c| self.weights[c].iter().copied().chain([self.bias[c]]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ForestError> {
        if rows.len() != NUM_CLASSES || rows.iter().any(|r| r.len() != NUM_FEATURES + 1) {
            return Err(ForestError::ModelNotTrained);
        }
        let mut m = LogisticModel::zeros();
        for (c, r) in rows.iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(ForestError::NonFiniteFeature { row: c, col: 0 });
            }
            m.weights[c].copy_from_slice(&r[..NUM_FEATURES]);
            m.bias[c] = r[NUM_FEATURES];
        }
        Ok(m)
    }
}

/// Fits from zero initialization; also returns the loss after every step.
pub fn train_logistic_traced(
    x: &[FeatureRow],
    y: &[Level],
    params: &LogisticParams,
) -> Result<(LogisticModel, Vec<f64>), ForestError> {
    check_training_set(x, y)?;
    let mut model = LogisticModel::zeros();
    let mut trace = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let g = model.gradient(x, y, params.l2);
        model.step(&g, params.step_size);
        trace.push(model.loss(x, y, params.l2));
    }
    Ok((model, trace))
}

pub fn train_logistic(x: &[FeatureRow], y: &[Level], params: &LogisticParams) -> Result<LogisticModel, ForestError> {
    check_training_set(x, y)?;
    let mut model = LogisticModel::zeros();
    for _ in 0..params.iterations {
        let g = model.gradient(x, y, params.l2);
        model.step(&g, params.step_size);
    }
    Ok(model)
}
