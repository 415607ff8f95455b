//! L2-regularized logistic regression fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{EncodedDataset, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LRParams {
    /// Weight of `0.5 * ||w||^2`; the intercept is not penalized.
    pub l2_penalty: f64,
    pub max_epochs: usize,
    /// Stop once an epoch improves the objective by less than this, relative.
    pub tolerance: f64,
}

impl Default for LRParams {
    fn default() -> Self {
        LRParams {
            l2_penalty: 1.0,
            max_epochs: 100,
            tolerance: 1e-10,
        }
    }
}

impl LRParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_penalty > 0.0) || self.max_epochs == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Argument(
                "l2_penalty, max_epochs and tolerance must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub params: LRParams,
    /// Per-feature centering and scaling applied before the linear part.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub intercept: f64,
    pub weights: Vec<f64>,
    /// Objective after every epoch, starting with the initial point.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for j in 0..self.weights.len() {
            z += self.weights[j] * (row[j] - self.means[j]) / self.scales[j];
        }
        z
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `sum_i softplus(z_i) - y_i z_i + lambda/2 ||w||^2` with `z_i = theta[0] + x_i . theta[1..]`.
pub fn objective(x: &Matrix, y: &[u8], theta: &[f64], lambda: f64) -> f64 {
    let mut loss = 0.0;
    for (row, &yi) in x.rows().zip(y) {
        let z = linear(row, theta);
        loss += softplus(z) - yi as f64 * z;
    }
    loss + 0.5 * lambda * theta[1..].iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`objective`] with respect to `theta`.
pub fn gradient(x: &Matrix, y: &[u8], theta: &[f64], lambda: f64) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for (row, &yi) in x.rows().zip(y) {
        let r = sigmoid(linear(row, theta)) - yi as f64;
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    for (gj, w) in g[1..].iter_mut().zip(&theta[1..]) {
        *gj += lambda * w;
    }
    g
}

fn linear(row: &[f64], theta: &[f64]) -> f64 {
    theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
}

fn hessian(x: &Matrix, theta: &[f64], lambda: f64) -> DMatrix<f64> {
    let d = theta.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let mut ext = vec![1.0; d];
    for row in x.rows() {
        let p = sigmoid(linear(row, theta));
        let w = p * (1.0 - p);
        ext[1..].copy_from_slice(row);
        for a in 0..d {
            let wa = w * ext[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..d {
                h[(a, b)] += wa * ext[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    for a in 1..d {
        h[(a, a)] += lambda;
    }
    h
}

fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(g);
    let scale = h.diagonal().amax().max(1.0);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut hj = h.clone();
        for a in 0..hj.nrows() {
            hj[(a, a)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            return Some(ch.solve(&rhs).iter().map(|v| -v).collect());
        }
        jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 10.0 };
    }
    None
}

/// Column means and scales: continuous features are z-scored, others left as is.
fn standardization(ds: &EncodedDataset) -> (Vec<f64>, Vec<f64>) {
    let n = ds.n_rows() as f64;
    let d = ds.n_features();
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for (j, f) in ds.features.iter().enumerate() {
        if !f.is_continuous() {
            continue;
        }
        let mean = ds.x.rows().map(|r| r[j]).sum::<f64>() / n;
        let var = ds.x.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        means[j] = mean;
        if var > 0.0 {
            scales[j] = var.sqrt();
        }
    }
    (means, scales)
}

/// Fits the model by full-batch Newton with Armijo backtracking. The fit is
/// deterministic; `_seed` is accepted for interface symmetry with boosting.
pub fn train_logistic(ds: &EncodedDataset, params: &LRParams, _seed: u64) -> Result<LogisticModel> {
    params.validate()?;
    let n = ds.n_rows();
    let positives = ds.y.iter().filter(|&&v| v == 1).count();
    if n < 2 || positives == 0 || positives == n {
        return Err(Error::DegenerateTraining(format!(
            "logistic regression needs both classes ({positives} positives among {n} rows)"
        )));
    }
    let (means, scales) = standardization(ds);
    let d = ds.n_features();
    let mut z = Vec::with_capacity(n * d);
    for row in ds.x.rows() {
        z.extend((0..d).map(|j| (row[j] - means[j]) / scales[j]));
    }
    let x = Matrix::from_vec(z, n, d)?;
    let lambda = params.l2_penalty;

    let mut theta = vec![0.0; d + 1];
    let rate = positives as f64 / n as f64;
    theta[0] = (rate / (1.0 - rate)).ln();
    let mut loss = objective(&x, &ds.y, &theta, lambda);
    let mut history = vec![loss];

    for _ in 0..params.max_epochs {
        let g = gradient(&x, &ds.y, &theta, lambda);
        let Some(dir) = newton_direction(hessian(&x, &theta, lambda), &g) else {
            log::warn!("logistic regression: Hessian could not be factored, stopping early");
            break;
        };
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let l = objective(&x, &ds.y, &cand, lambda);
            if l <= loss + 1e-4 * step * slope {
                accepted = Some((cand, l));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, l)) = accepted else { break };
        let improvement = loss - l;
        theta = cand;
        loss = l;
        history.push(loss);
        if improvement <= params.tolerance * loss.abs().max(1.0) {
            break;
        }
    }

    Ok(LogisticModel {
        params: *params,
        means,
        scales,
        intercept: theta[0],
        weights: theta[1..].to_vec(),
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureInfo, FeatureKind};
    use proptest::prelude::*;

    fn dataset(rows: &[Vec<f64>], y: &[u8], continuous: bool) -> EncodedDataset {
        let x = Matrix::from_rows(rows).unwrap();
        let d = x.n_cols();
        let kind = if continuous {
            FeatureKind::Continuous
        } else {
            FeatureKind::OneHot { value: "v".into() }
        };
        EncodedDataset::new(
            x,
            y.to_vec(),
            vec![1; y.len()],
            (0..d)
                .map(|j| FeatureInfo {
                    name: format!("f{j}"),
                    origin: format!("f{j}"),
                    kind: kind.clone(),
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn separable_pair() {
        let ds = dataset(&[vec![-1.0], vec![1.0]], &[0, 1], true);
        let m = train_logistic(&ds, &LRParams::default(), 0).unwrap();
        assert!(m.score(&[-1.0]) < 0.5);
        assert!(m.score(&[1.0]) > 0.5);
    }

    #[test]
    fn zero_features_fit_the_base_rate() {
        let y = [1, 0, 0, 0, 1, 0, 0, 0];
        let ds = dataset(&vec![vec![0.0, 0.0]; 8], &y, false);
        let m = train_logistic(&ds, &LRParams::default(), 0).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!((m.score(&[0.0, 0.0]) - 0.25).abs() < 1e-9);
        assert!((sigmoid(m.intercept) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn single_class_is_degenerate() {
        let ds = dataset(&[vec![1.0], vec![2.0]], &[1, 1], true);
        assert!(matches!(
            train_logistic(&ds, &LRParams::default(), 0),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            raw in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, any::<bool>()), 3..30),
            theta in prop::collection::vec(-1.5f64..1.5, 4),
            lambda in 0.01f64..3.0,
        ) {
            let rows: Vec<Vec<f64>> = raw.iter().map(|r| vec![r.0, r.1, r.2]).collect();
            let y: Vec<u8> = raw.iter().map(|r| r.3 as u8).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let g = gradient(&x, &y, &theta, lambda);
            for k in 0..theta.len() {
                let h = 1e-5;
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (objective(&x, &y, &up, lambda) - objective(&x, &y, &dn, lambda)) / (2.0 * h);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1.0);
                prop_assert!(rel <= 1e-5, "coordinate {k}: fd {fd}, analytic {}", g[k]);
            }
        }

        #[test]
        fn loss_is_non_increasing(
            raw in prop::collection::vec((-3.0f64..3.0, 0u8..2, any::<bool>()), 4..60),
        ) {
            let rows: Vec<Vec<f64>> = raw.iter().map(|r| vec![r.0, r.1 as f64]).collect();
            let mut y: Vec<u8> = raw.iter().map(|r| r.2 as u8).collect();
            y[0] = 0;
            y[1] = 1;
            let ds = dataset(&rows, &y, true);
            let m = train_logistic(&ds, &LRParams::default(), 0).unwrap();
            for w in m.loss_history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for r in &rows {
                let p = m.score(r);
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
