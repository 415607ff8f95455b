use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::dataset::ValueRef;
use crate::error::{Error, Result};
use crate::inference::{percentile, CIEstimate};
use crate::mitigation::GroupThresholds;
use crate::models::EvalMetrics;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The uncalibrated model a positive-discrimination fold is compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub metrics: EvalMetrics,
    pub di: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    /// Derived from the master seed and `fold`.
    pub fold_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: EvalMetrics,
    /// Classifier disparate impact on the held-out fold.
    pub di: Option<f64>,
    pub di_ci: Option<CIEstimate>,
    pub tp_ratio: Option<f64>,
    pub tn_ratio: Option<f64>,
    /// Share of held-out rows whose decision flips with `S`; absent when `S` is not a feature.
    pub flip_fraction: Option<f64>,
    /// Disparate impact of the held-out labels.
    pub ref_di: Option<CIEstimate>,
    pub thresholds: Option<GroupThresholds>,
    pub baseline: Option<BaselineRecord>,
}

impl FoldRecord {
    /// Every scalar recorded for the fold, by metric name, in a fixed order.
    pub fn values(&self) -> Vec<(&'static str, Option<f64>)> {
        let m = &self.metrics;
        let mut v = vec![
            ("accuracy", m.overall.accuracy),
            ("tpr", m.overall.true_positive_rate),
            ("tnr", m.overall.true_negative_rate),
            ("accuracy_s0", m.groups[0].accuracy),
            ("accuracy_s1", m.groups[1].accuracy),
            ("tpr_s0", m.groups[0].true_positive_rate),
            ("tpr_s1", m.groups[1].true_positive_rate),
            ("tnr_s0", m.groups[0].true_negative_rate),
            ("tnr_s1", m.groups[1].true_negative_rate),
            ("fpr_s0", m.groups[0].false_positive_rate),
            ("fpr_s1", m.groups[1].false_positive_rate),
            ("di", self.di),
            ("di_lower", self.di_ci.map(|c| c.lower)),
            ("di_upper", self.di_ci.map(|c| c.upper)),
            ("tp_ratio", self.tp_ratio),
            ("tn_ratio", self.tn_ratio),
            ("flip_fraction", self.flip_fraction),
            ("ref_di", self.ref_di.map(|c| c.point)),
            ("ref_di_lower", self.ref_di.map(|c| c.lower)),
            ("ref_di_upper", self.ref_di.map(|c| c.upper)),
        ];
        if let Some(t) = &self.thresholds {
            v.push(("t0", Some(t.t0)));
            v.push(("t1", Some(t.t1)));
            v.push(("training_di", Some(t.training_di)));
        }
        if let Some(b) = &self.baseline {
            v.push(("baseline_accuracy", b.metrics.overall.accuracy));
            v.push(("baseline_fpr_s0", b.metrics.groups[0].false_positive_rate));
            v.push(("baseline_fpr_s1", b.metrics.groups[1].false_positive_rate));
            v.push(("baseline_di", b.di));
        }
        v
    }
}

/// Five-number summary plus mean, over the folds where a value is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Summary {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: sorted[0],
            q1: percentile(&sorted, 0.25),
            median: percentile(&sorted, 0.5),
            q3: percentile(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

pub fn aggregate(folds: &[FoldRecord]) -> BTreeMap<String, Summary> {
    let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for f in folds {
        for (name, v) in f.values() {
            let entry = by_metric.entry(name).or_default();
            if let Some(v) = v {
                entry.push(v);
            }
        }
    }
    by_metric
        .into_iter()
        .filter_map(|(k, v)| Summary::of(&v).map(|s| (k.to_string(), s)))
        .collect()
}

/// Disparate impact of the labels, on the full data and per held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub full: CIEstimate,
    pub per_fold: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dataset: String,
    pub sensitive: ValueRef,
    /// Raw values of the sensitive column for `s = 0` and `s = 1`.
    pub group_labels: [String; 2],
    pub n_rows: usize,
    pub folds: Vec<FoldRecord>,
    pub aggregate: BTreeMap<String, Summary>,
    pub reference: Reference,
}

impl ExperimentReport {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).map(|s| s.mean)
    }
}

/// Plot-ready row: one per fold, one aggregate and one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `fold`, `mean` or `ref`.
    pub kind: String,
    pub fold: Option<usize>,
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub di: Option<f64>,
    pub di_lower: Option<f64>,
    pub di_upper: Option<f64>,
}

pub fn summarize(report: &ExperimentReport) -> Result<Vec<SummaryRow>> {
    if report.folds.is_empty() {
        return Err(Error::Argument("cannot summarize a report without folds".into()));
    }
    let mut rows: Vec<SummaryRow> = report
        .folds
        .iter()
        .map(|f| SummaryRow {
            kind: "fold".into(),
            fold: Some(f.fold),
            accuracy: f.metrics.overall.accuracy,
            tpr: f.metrics.overall.true_positive_rate,
            tnr: f.metrics.overall.true_negative_rate,
            di: f.di,
            di_lower: f.di_ci.map(|c| c.lower),
            di_upper: f.di_ci.map(|c| c.upper),
        })
        .collect();
    let mean = |k: &str| report.mean(k);
    rows.push(SummaryRow {
        kind: "mean".into(),
        fold: None,
        accuracy: mean("accuracy"),
        tpr: mean("tpr"),
        tnr: mean("tnr"),
        di: mean("di"),
        di_lower: mean("di_lower"),
        di_upper: mean("di_upper"),
    });
    let r = &report.reference.full;
    rows.push(SummaryRow {
        kind: "ref".into(),
        fold: None,
        accuracy: None,
        tpr: None,
        tnr: None,
        di: Some(r.point),
        di_lower: Some(r.lower),
        di_upper: Some(r.upper),
    });
    Ok(rows)
}

/// A configuration that could not be run, kept so a suite can report it and continue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedExperiment {
    pub config: ExperimentConfig,
    /// Error category, as given by [`Error::category`].
    pub category: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub reports: Vec<ExperimentReport>,
    pub failures: Vec<FailedExperiment>,
}

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "model",
    "strategy",
    "sensitive",
    "fold",
    "metric",
    "value",
];

/// Long-format CSV: one row per fold per metric, then the aggregate statistics
/// (`fold` = `mean`, `min`, `q1`, `median`, `q3`, `max`) and the full-data
/// reference (`fold` = `ref`). Undefined values are left empty.
pub fn write_csv<W: std::io::Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for r in reports {
        let model = r.config.model.family().to_string();
        let strategy = r.config.strategy.to_string();
        let sensitive = r.sensitive.column.clone();
        let mut row = |fold: &str, metric: &str, value: Option<f64>| {
            w.write_record([
                r.config.name.as_str(),
                model.as_str(),
                strategy.as_str(),
                sensitive.as_str(),
                fold,
                metric,
                &value.map(|v| v.to_string()).unwrap_or_default(),
            ])
        };
        for f in &r.folds {
            for (metric, value) in f.values() {
                row(&f.fold.to_string(), metric, value).map_err(ser)?;
            }
        }
        for (metric, s) in &r.aggregate {
            for (stat, v) in [
                ("mean", s.mean),
                ("min", s.min),
                ("q1", s.q1),
                ("median", s.median),
                ("q3", s.q3),
                ("max", s.max),
            ] {
                row(stat, metric, Some(v)).map_err(ser)?;
            }
        }
        let full = &r.reference.full;
        row("ref", "ref_di", Some(full.point)).map_err(ser)?;
        row("ref", "ref_di_lower", Some(full.lower)).map_err(ser)?;
        row("ref", "ref_di_upper", Some(full.upper)).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_one_value() {
        let s = Summary::of(&[0.3]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.mean), (0.3, 0.3, 0.3, 0.3, 0.3, 0.3));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn quartiles_interpolate() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(s.mean, 3.0);
    }
}
