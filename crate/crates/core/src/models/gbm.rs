//! Gradient boosting of regression trees on the logistic loss.

use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, softplus};
use super::tree::{grow, Binned, Newton, Stats, Tree};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GBMParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_samples_leaf: usize,
    /// Smallest hessian sum a child may carry.
    pub min_child_hessian: f64,
    /// L2 weight on leaf values.
    pub l2: f64,
}

impl Default for GBMParams {
    fn default() -> Self {
        GBMParams {
            n_rounds: 100,
            max_depth: 3,
            shrinkage: 0.1,
            min_samples_leaf: 20,
            min_child_hessian: 1e-3,
            l2: 1.0,
        }
    }
}

impl GBMParams {
    /// Zero rounds and zero shrinkage are accepted; both yield the constant base-rate model.
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Argument(
                "max_depth and min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.shrinkage >= 0.0) || !(self.l2 >= 0.0) || !(self.min_child_hessian >= 0.0) {
            return Err(Error::Argument(
                "shrinkage, l2 and min_child_hessian must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub params: GBMParams,
    pub base_margin: f64,
    /// Leaf values already include the shrinkage factor.
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

impl GbmModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

fn log_loss(y: u8, margin: f64) -> f64 {
    softplus(margin) - y as f64 * margin
}

pub fn train_gbm(ds: &EncodedDataset, params: &GBMParams, _seed: u64) -> Result<GbmModel> {
    params.validate()?;
    let n = ds.n_rows();
    let positives = ds.y.iter().filter(|&&v| v == 1).count();
    if n < 2 || positives == 0 || positives == n {
        return Err(Error::DegenerateTraining(format!(
            "boosting needs both classes ({positives} positives among {n} rows)"
        )));
    }
    let rate = positives as f64 / n as f64;
    let base_margin = (rate / (1.0 - rate)).ln();
    let mut margins = vec![base_margin; n];
    let mean_loss =
        |m: &[f64]| ds.y.iter().zip(m).map(|(&y, &z)| log_loss(y, z)).sum::<f64>() / n as f64;
    let mut history = vec![mean_loss(&margins)];
    let mut trees = Vec::with_capacity(params.n_rounds);

    let binned = Binned::new(&ds.x);
    let criterion = Newton {
        min_samples_leaf: params.min_samples_leaf,
        min_child_hessian: params.min_child_hessian,
        lambda: params.l2,
    };
    for _ in 0..params.n_rounds {
        let stats: Vec<Stats> = ds
            .y
            .iter()
            .zip(&margins)
            .map(|(&y, &z)| {
                let p = sigmoid(z);
                Stats {
                    count: 1.0,
                    a: p - y as f64,
                    b: p * (1.0 - p),
                }
            })
            .collect();
        let mut grown = grow(&binned, &stats, (0..n).collect(), params.max_depth, &criterion);
        for (leaf, rows) in &grown.leaves {
            let mut value = match &grown.tree.nodes[*leaf] {
                super::tree::Node::Leaf { value, .. } => value * params.shrinkage,
                _ => unreachable!(),
            };
            // the leaves partition the rows, so a per-leaf guard keeps the total loss monotone
            let before: f64 = rows.iter().map(|&r| log_loss(ds.y[r], margins[r])).sum();
            let mut halvings = 0;
            while value != 0.0 {
                let after: f64 = rows
                    .iter()
                    .map(|&r| log_loss(ds.y[r], margins[r] + value))
                    .sum();
                if after <= before {
                    break;
                }
                halvings += 1;
                value = if halvings > 40 { 0.0 } else { value * 0.5 };
            }
            grown.tree.set_leaf_value(*leaf, value);
            for &r in rows {
                margins[r] += value;
            }
        }
        trees.push(grown.tree);
        history.push(mean_loss(&margins));
    }

    Ok(GbmModel {
        params: *params,
        base_margin,
        trees,
        loss_history: history,
    })
}
