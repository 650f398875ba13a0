//! Single-document JSON model files.
//!
//! A model file bundles the classifier, the preprocessing statistics it was
//! trained with, and the feature order. Loading rejects files whose format
//! version, feature order or label map differ from this build.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::encoder::{canonical_spec, PoseEncoding};
use crate::forest::{
    Classifier, DecisionTree, ForestError, Hyperparams, LogisticModel, LogisticParams, Prediction, RandomForest,
};
use crate::level::Level;
use crate::preprocess::{transform, PreprocessStats};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    spec_order: Vec<String>,
    preprocess: PreprocessStats,
    kind: String,
    params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<DecisionTree>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    label_map: Vec<String>,
    seed: u64,
}

/// A classifier with the statistics needed to feed it raw encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub stats: PreprocessStats,
    pub seed: u64,
    /// Settings of a logistic model; trees and forests carry their own.
    pub logistic_params: Option<LogisticParams>,
}

fn label_map() -> Vec<String> {
    Level::ALL.iter().map(|l| l.tag().to_string()).collect()
}

fn bad(msg: impl Into<String>) -> PipelineError {
    PipelineError::BadModelFile(msg.into())
}

impl TrainedModel {
    pub fn predict(&self, enc: &PoseEncoding) -> Result<Prediction, ForestError> {
        self.classifier.predict(&transform(enc, &self.stats))
    }

    pub fn to_json(&self) -> String {
        let (params, trees, weights) = match &self.classifier {
            Classifier::Tree(t) => (
                serde_json::to_value(Hyperparams::single_tree()).expect("params serialize"),
                Some(vec![t.clone()]),
                None,
            ),
            Classifier::Forest(f) => (
                serde_json::to_value(&f.params).expect("params serialize"),
                Some(f.trees.clone()),
                None,
            ),
            Classifier::Logistic(m) => (
                serde_json::to_value(self.logistic_params.unwrap_or_default()).expect("params serialize"),
                None,
                Some(m.to_rows()),
            ),
        };
        let doc = ModelDocument {
            format_version: FORMAT_VERSION,
            spec_order: canonical_spec().names(),
            preprocess: self.stats.clone(),
            kind: self.classifier.kind().to_string(),
            params,
            trees,
            weights,
            label_map: label_map(),
            seed: self.seed,
        };
        let mut s = serde_json::to_string(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", doc.format_version)));
        }
        if doc.spec_order != canonical_spec().names() {
            return Err(bad("feature order does not match this build"));
        }
        if doc.label_map != label_map() {
            return Err(bad("label map does not match this build"));
        }
        let stats = doc.preprocess;
        if stats.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || stats.mean.iter().any(|m| !m.is_finite()) {
            return Err(bad("preprocess statistics are not finite and positive"));
        }
        let model_err = |e: ForestError| bad(e.to_string());
        let mut logistic_params = None;
        let classifier = match doc.kind.as_str() {
            "tree" | "forest" => {
                let trees = doc.trees.ok_or_else(|| bad("missing trees"))?;
                for t in &trees {
                    t.validate().map_err(model_err)?;
                }
                let params: Hyperparams = serde_json::from_value(doc.params).map_err(|e| bad(e.to_string()))?;
                if doc.kind == "tree" {
                    let [tree]: [DecisionTree; 1] = trees.try_into().map_err(|_| bad("tree model needs exactly one tree"))?;
                    Classifier::Tree(tree)
                } else {
                    if trees.is_empty() {
                        return Err(model_err(ForestError::ModelNotTrained));
                    }
                    Classifier::Forest(RandomForest { trees, params })
                }
            }
            "logistic" => {
                let rows = doc.weights.ok_or_else(|| bad("missing weights"))?;
                logistic_params = Some(serde_json::from_value(doc.params).map_err(|e| bad(e.to_string()))?);
                Classifier::Logistic(LogisticModel::from_rows(&rows).map_err(model_err)?)
            }
            other => return Err(bad(format!("unknown model kind {other:?}"))),
        };
        Ok(TrainedModel {
            classifier,
            stats,
            seed: doc.seed,
            logistic_params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, self.to_json()).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        TrainedModel::from_json(&text)
    }
}
