//! Baseline classifiers and their evaluation.

mod eval;
mod gbm;
mod logistic;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

pub use eval::{evaluate, evaluate_predictions, Confusion, EvalMetrics, Rates};
pub use gbm::{train_gbm, GBMParams, GbmModel};
pub use logistic::{gradient, objective, sigmoid, train_logistic, LRParams, LogisticModel};
pub use tree::{train_tree, Node, Tree, TreeModel, TreeParams};

/// Estimate of `P(Y = 1 | X = x)`.
pub trait Scorer: Send + Sync {
    fn score(&self, row: &[f64]) -> f64;
}

/// Binary decision rule. `s` is the row's group, which wrappers may route on.
pub trait Classifier: Send + Sync {
    fn predict(&self, row: &[f64], s: u8) -> u8;

    fn predict_dataset(&self, ds: &EncodedDataset) -> Vec<u8> {
        (0..ds.n_rows())
            .map(|i| self.predict(ds.row(i), ds.s[i]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    Tree,
    Gbm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Logistic, ModelFamily::Tree, ModelFamily::Gbm];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelFamily::Logistic => "LR",
            ModelFamily::Tree => "DT",
            ModelFamily::Gbm => "GB",
        }
    }

    pub fn default_params(self) -> ModelParams {
        match self {
            ModelFamily::Logistic => ModelParams::Logistic(LRParams::default()),
            ModelFamily::Tree => ModelParams::Tree(TreeParams::default()),
            ModelFamily::Gbm => ModelParams::Gbm(GBMParams::default()),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ModelFamily::Logistic),
            "dt" | "tree" => Ok(ModelFamily::Tree),
            "gb" | "gbm" => Ok(ModelFamily::Gbm),
            other => Err(Error::Argument(format!(
                "unknown model family '{other}' (expected lr, dt or gb)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LRParams),
    Tree(TreeParams),
    Gbm(GBMParams),
}

impl ModelParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelParams::Logistic(_) => ModelFamily::Logistic,
            ModelParams::Tree(_) => ModelFamily::Tree,
            ModelParams::Gbm(_) => ModelFamily::Gbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Logistic(p) => p.validate(),
            ModelParams::Tree(p) => p.validate(),
            ModelParams::Gbm(p) => p.validate(),
        }
    }
}

/// A trained scorer of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Tree(TreeModel),
    Gbm(GbmModel),
}

impl Model {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Logistic(_) => ModelFamily::Logistic,
            Model::Tree(_) => ModelFamily::Tree,
            Model::Gbm(_) => ModelFamily::Gbm,
        }
    }
}

impl Scorer for Model {
    fn score(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.score(row),
            Model::Tree(m) => m.score(row),
            Model::Gbm(m) => m.score(row),
        }
    }
}

pub fn train(ds: &EncodedDataset, params: &ModelParams, seed: u64) -> Result<Model> {
    Ok(match params {
        ModelParams::Logistic(p) => Model::Logistic(train_logistic(ds, p, seed)?),
        ModelParams::Tree(p) => Model::Tree(train_tree(ds, p)?),
        ModelParams::Gbm(p) => Model::Gbm(train_gbm(ds, p, seed)?),
    })
}

/// `g(x) = 1` iff `score(x) >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedClassifier {
    pub model: Model,
    pub threshold: f64,
}

impl ThresholdedClassifier {
    pub fn new(model: Model) -> Self {
        ThresholdedClassifier {
            model,
            threshold: 0.5,
        }
    }

    pub fn with_threshold(model: Model, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Argument(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(ThresholdedClassifier { model, threshold })
    }
}

impl Scorer for ThresholdedClassifier {
    fn score(&self, row: &[f64]) -> f64 {
        self.model.score(row)
    }
}

impl Classifier for ThresholdedClassifier {
    fn predict(&self, row: &[f64], _s: u8) -> u8 {
        u8::from(self.model.score(row) >= self.threshold)
    }
}
