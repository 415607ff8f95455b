//! Delta-method intervals for ratios of group-conditional rates.
//!
//! Every ratio here is `phi(E Z) = (z1 * z4) / (z2 * z3)` for the indicator
//! vector `Z = (1{A0}, 1{A1}, 1{B0}, 1{B1})`, where `A_s` is the event
//! counted in group `s` and `B_s` its conditioning set, so `A_s` lies inside
//! `B_s` and `B0`, `B1` are disjoint. With `p_s = P(A_s)`, `r_s = P(B_s)`:
//!
//! ```text
//! DI = (p0 / r0) / (p1 / r1)
//! ```
//!
//! The covariance of `Z` follows from `Cov(1{A}, 1{B}) = P(A n B) - P(A) P(B)`:
//! cross terms between disjoint events reduce to `-P(A) P(B)` and nested
//! ones to `P(A) (1 - P(B))`. For disparate impact `r0 + r1 = 1`, which gives
//! the familiar `pi0 * pi1` entries.

use serde::{Deserialize, Serialize};

use super::normal::normal_quantile;
use crate::metrics::{GroupedCounts, Metric, RateKind, RatioCounts};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CIMethod {
    Delta,
    BootstrapPercentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CIEstimate {
    pub metric: Metric,
    pub method: CIMethod,
    pub point: f64,
    /// Asymptotic standard deviation of `sqrt(n) * (T_n - T)`; absent for bootstrap intervals.
    pub sigma: Option<f64>,
    pub n: u64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CIEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Which disparate impact an interval or test refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiTarget {
    Data,
    Classifier,
}

impl DiTarget {
    pub fn metric(self) -> Metric {
        match self {
            DiTarget::Data => Metric::DataDi,
            DiTarget::Classifier => Metric::ClassifierDi,
        }
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("confidence level {level} outside (0, 1)")))
    }
}

/// Gradient of `phi` at the plug-in point.
pub fn ratio_gradient(p: [f64; 2], r: [f64; 2]) -> [f64; 4] {
    let [p0, p1] = p;
    let [r0, r1] = r;
    [
        r1 / (p1 * r0),
        -p0 * r1 / (p1 * p1 * r0),
        -p0 * r1 / (p1 * r0 * r0),
        p0 / (p1 * r0),
    ]
}

/// Covariance of `Z` for nested `A_s` in `B_s` with disjoint `B0`, `B1`.
pub fn indicator_covariance(p: [f64; 2], r: [f64; 2]) -> [[f64; 4]; 4] {
    let [p0, p1] = p;
    let [r0, r1] = r;
    let c12 = -p0 * p1;
    let c13 = p0 * (1.0 - r0);
    let c14 = -p0 * r1;
    let c23 = -p1 * r0;
    let c24 = p1 * (1.0 - r1);
    let c34 = -r0 * r1;
    [
        [p0 * (1.0 - p0), c12, c13, c14],
        [c12, p1 * (1.0 - p1), c23, c24],
        [c13, c23, r0 * (1.0 - r0), c34],
        [c14, c24, c34, r1 * (1.0 - r1)],
    ]
}

/// Plug-in `sigma = sqrt(grad' Sigma grad)` for the ratio behind `rc`.
pub fn ratio_sigma(rc: &RatioCounts) -> Result<f64> {
    let n = rc.n as f64;
    let p = [rc.positives[0] as f64 / n, rc.positives[1] as f64 / n];
    let r = [rc.totals[0] as f64 / n, rc.totals[1] as f64 / n];
    let names = ["p0", "p1", "r0", "r1"];
    for (name, v) in names.iter().zip(p.iter().chain(&r)) {
        if !(*v > 0.0) {
            return Err(Error::DegenerateVariance(format!(
                "{}: plug-in probability {name} is zero",
                rc.metric
            )));
        }
    }
    let g = ratio_gradient(p, r);
    let s = indicator_covariance(p, r);
    let mut q = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            q += g[a] * s[a][b] * g[b];
        }
    }
    Ok(q.max(0.0).sqrt())
}

pub fn di_sigma(counts: &GroupedCounts, target: DiTarget) -> Result<f64> {
    ratio_sigma(&counts.ratio_counts(target.metric())?)
}

pub fn rate_ratio_sigma(counts: &GroupedCounts, which: RateKind) -> Result<f64> {
    ratio_sigma(&counts.ratio_counts(which.metric())?)
}

/// `T_n +- sigma / sqrt(n) * z_{1 - alpha/2}`.
pub fn ratio_confidence_interval(rc: &RatioCounts, level: f64) -> Result<CIEstimate> {
    check_level(level)?;
    let point = rc.value()?.value;
    let sigma = ratio_sigma(rc)?;
    let half = sigma / (rc.n as f64).sqrt() * normal_quantile(0.5 + level / 2.0);
    Ok(CIEstimate {
        metric: rc.metric,
        method: CIMethod::Delta,
        point,
        sigma: Some(sigma),
        n: rc.n,
        level,
        lower: point - half,
        upper: point + half,
    })
}

pub fn confidence_interval(counts: &GroupedCounts, metric: Metric, level: f64) -> Result<CIEstimate> {
    ratio_confidence_interval(&counts.ratio_counts(metric)?, level)
}

/// Interval for the disparate impact of the labels.
pub fn di_confidence_interval(counts: &GroupedCounts, level: f64) -> Result<CIEstimate> {
    confidence_interval(counts, Metric::DataDi, level)
}

pub fn rate_ratio_confidence_interval(
    counts: &GroupedCounts,
    which: RateKind,
    level: f64,
) -> Result<CIEstimate> {
    confidence_interval(counts, which.metric(), level)
}
