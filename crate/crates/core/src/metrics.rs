//! Contingency counts and the ratio indices computed from them.
//!
//! Disparate impact and the true positive / true negative rate ratios all
//! share one shape: a rate of some event within a conditioning set for the
//! protected group, divided by the same rate for the other group. That shape
//! is captured by [`RatioCounts`], which the inference module consumes too.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::models::Classifier;

/// Exact counts of `(Y, S)` and, when predictions are given, of `(g, Y, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedCounts {
    /// `n[y][s]`
    pub n: [[u64; 2]; 2],
    /// `m[g][y][s]`
    pub m: Option<[[[u64; 2]; 2]; 2]>,
    pub n_total: u64,
}

impl GroupedCounts {
    pub fn from_cells(n: [[u64; 2]; 2]) -> Self {
        GroupedCounts {
            n,
            m: None,
            n_total: n.iter().flatten().sum(),
        }
    }

    /// Counts with predictions; `n` is the marginal of `m` over `g`.
    pub fn from_joint(m: [[[u64; 2]; 2]; 2]) -> Self {
        let mut n = [[0; 2]; 2];
        for g in m {
            for y in 0..2 {
                for s in 0..2 {
                    n[y][s] += g[y][s];
                }
            }
        }
        GroupedCounts {
            n,
            m: Some(m),
            n_total: n.iter().flatten().sum(),
        }
    }

    pub fn group_size(&self, s: usize) -> u64 {
        self.n[0][s] + self.n[1][s]
    }

    /// Rescales every cell by `c`; used for replication arguments.
    pub fn scaled(&self, c: u64) -> Self {
        let mut out = *self;
        out.n_total *= c;
        out.n.iter_mut().flatten().for_each(|v| *v *= c);
        if let Some(m) = &mut out.m {
            m.iter_mut().flatten().flatten().for_each(|v| *v *= c);
        }
        out
    }

    /// The event and conditioning counts behind `metric`.
    pub fn ratio_counts(&self, metric: Metric) -> Result<RatioCounts> {
        let joint = || {
            self.m.ok_or_else(|| {
                Error::Argument(format!("{metric} needs predictions alongside the labels"))
            })
        };
        let (positives, totals) = match metric {
            Metric::DataDi => (
                [self.n[1][0], self.n[1][1]],
                [self.group_size(0), self.group_size(1)],
            ),
            Metric::ClassifierDi => {
                let m = joint()?;
                (
                    [m[1][0][0] + m[1][1][0], m[1][0][1] + m[1][1][1]],
                    [self.group_size(0), self.group_size(1)],
                )
            }
            Metric::TpRatio => {
                let m = joint()?;
                ([m[1][1][0], m[1][1][1]], [self.n[1][0], self.n[1][1]])
            }
            Metric::TnRatio => {
                let m = joint()?;
                ([m[0][0][0], m[0][0][1]], [self.n[0][0], self.n[0][1]])
            }
        };
        Ok(RatioCounts {
            metric,
            positives,
            totals,
            n: self.n_total,
        })
    }
}

pub fn count_groups(y: &[u8], s: &[u8], yhat: Option<&[u8]>) -> Result<GroupedCounts> {
    if y.len() != s.len() || yhat.is_some_and(|p| p.len() != y.len()) {
        return Err(Error::Argument(format!(
            "length mismatch: y {}, s {}, predictions {}",
            y.len(),
            s.len(),
            yhat.map_or(y.len(), <[u8]>::len)
        )));
    }
    let all = y.iter().chain(s).chain(yhat.unwrap_or_default());
    if all.into_iter().any(|&v| v > 1) {
        return Err(Error::Argument("labels, groups and predictions must be 0/1".into()));
    }
    match yhat {
        None => {
            let mut n = [[0u64; 2]; 2];
            for (&yi, &si) in y.iter().zip(s) {
                n[yi as usize][si as usize] += 1;
            }
            Ok(GroupedCounts::from_cells(n))
        }
        Some(p) => {
            let mut m = [[[0u64; 2]; 2]; 2];
            for i in 0..y.len() {
                m[p[i] as usize][y[i] as usize][s[i] as usize] += 1;
            }
            Ok(GroupedCounts::from_joint(m))
        }
    }
}

/// A ratio of group-conditional rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `P(Y=1|S=0) / P(Y=1|S=1)`
    DataDi,
    /// `P(g=1|S=0) / P(g=1|S=1)`
    ClassifierDi,
    /// `P(g=1|Y=1,S=0) / P(g=1|Y=1,S=1)`
    TpRatio,
    /// `P(g=0|Y=0,S=0) / P(g=0|Y=0,S=1)`
    TnRatio,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::DataDi => "data_di",
            Metric::ClassifierDi => "classifier_di",
            Metric::TpRatio => "tp_ratio",
            Metric::TnRatio => "tn_ratio",
        }
    }

    pub fn needs_predictions(self) -> bool {
        self != Metric::DataDi
    }

    /// Names of the event and conditioning cells for group `s`, for error messages.
    fn cells(self, s: usize) -> (String, String) {
        match self {
            Metric::DataDi => (format!("Y=1,S={s}"), format!("S={s}")),
            Metric::ClassifierDi => (format!("g=1,S={s}"), format!("S={s}")),
            Metric::TpRatio => (format!("g=1,Y=1,S={s}"), format!("Y=1,S={s}")),
            Metric::TnRatio => (format!("g=0,Y=0,S={s}"), format!("Y=0,S={s}")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "data_di" | "di" => Ok(Metric::DataDi),
            "classifier_di" => Ok(Metric::ClassifierDi),
            "tp_ratio" | "tp" => Ok(Metric::TpRatio),
            "tn_ratio" | "tn" => Ok(Metric::TnRatio),
            other => Err(Error::Argument(format!("unknown statistic '{other}'"))),
        }
    }
}

/// Event counts `positives[s]` inside conditioning sets of size `totals[s]`,
/// out of `n` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioCounts {
    pub metric: Metric,
    pub positives: [u64; 2],
    pub totals: [u64; 2],
    pub n: u64,
}

impl RatioCounts {
    pub fn rate(&self, s: usize) -> Option<f64> {
        (self.totals[s] > 0).then(|| self.positives[s] as f64 / self.totals[s] as f64)
    }

    pub fn value(&self) -> Result<DIValue> {
        for s in 0..2 {
            if self.totals[s] == 0 {
                return Err(Error::undefined(self.metric.name(), self.metric.cells(s).1));
            }
        }
        if self.positives[1] == 0 {
            return Err(Error::undefined(self.metric.name(), self.metric.cells(1).0));
        }
        let numerator_rate = self.positives[0] as f64 / self.totals[0] as f64;
        let denominator_rate = self.positives[1] as f64 / self.totals[1] as f64;
        Ok(DIValue {
            value: numerator_rate / denominator_rate,
            numerator_rate,
            denominator_rate,
            source: self.metric,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DIValue {
    pub value: f64,
    /// Rate in the protected group (`S = 0`).
    pub numerator_rate: f64,
    /// Rate in the other group (`S = 1`).
    pub denominator_rate: f64,
    pub source: Metric,
}

pub fn ratio(counts: &GroupedCounts, metric: Metric) -> Result<DIValue> {
    counts.ratio_counts(metric)?.value()
}

/// Disparate impact of the labels themselves.
pub fn disparate_impact(counts: &GroupedCounts) -> Result<DIValue> {
    ratio(counts, Metric::DataDi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    #[serde(rename = "tp")]
    TruePositive,
    #[serde(rename = "tn")]
    TrueNegative,
}

impl RateKind {
    pub fn metric(self) -> Metric {
        match self {
            RateKind::TruePositive => Metric::TpRatio,
            RateKind::TrueNegative => Metric::TnRatio,
        }
    }
}

pub fn rate_ratio(counts: &GroupedCounts, which: RateKind) -> Result<DIValue> {
    ratio(counts, which.metric())
}

pub fn disparate_impact_of_predictions(s: &[u8], yhat: &[u8]) -> Result<DIValue> {
    // a prediction vector audited as if it were the label
    let counts = count_groups(yhat, s, None)?;
    let mut v = disparate_impact(&counts).map_err(|e| match e {
        Error::UndefinedMetric { cell, .. } => Error::undefined(
            Metric::ClassifierDi.name(),
            cell.replace("Y=", "g="),
        ),
        other => other,
    })?;
    v.source = Metric::ClassifierDi;
    Ok(v)
}

pub fn disparate_impact_of_classifier(clf: &dyn Classifier, ds: &EncodedDataset) -> Result<DIValue> {
    disparate_impact_of_predictions(&ds.s, &clf.predict_dataset(ds))
}
