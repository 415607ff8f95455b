//! Bias-mitigation strategies as dataset transforms and classifier wrappers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::metrics::{disparate_impact_of_predictions, DIValue};
use crate::models::{
    evaluate_predictions, train, Classifier, EvalMetrics, Model, ModelParams, Scorer,
    ThresholdedClassifier,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    None,
    DropSensitive,
    TestingCompliant,
    Separate,
    PositiveDiscrimination,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::None,
        Strategy::DropSensitive,
        Strategy::TestingCompliant,
        Strategy::Separate,
        Strategy::PositiveDiscrimination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::DropSensitive => "drop_sensitive",
            Strategy::TestingCompliant => "testing_compliant",
            Strategy::Separate => "separate",
            Strategy::PositiveDiscrimination => "positive_discrimination",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_").to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown strategy '{s}' (expected one of {})",
                    Strategy::ALL.map(Strategy::name).join(", ")
                ))
            })
    }
}

/// Removes the columns encoding `S` from the features; `s` itself is kept for auditing.
pub fn drop_sensitive(ds: &EncodedDataset) -> EncodedDataset {
    if ds.sensitive_feature_indices.is_empty() {
        log::warn!("sensitive attribute already removed from the features");
        return ds.clone();
    }
    let drop = &ds.sensitive_feature_indices;
    let mut out = ds.clone();
    out.x = ds.x.drop_columns(drop);
    out.features = ds
        .features
        .iter()
        .enumerate()
        .filter(|(j, _)| !drop.contains(j))
        .map(|(_, f)| f.clone())
        .collect();
    out.sensitive_feature_indices.clear();
    out
}

/// Per-group decision thresholds: a row of group `s` is positive iff its score is `>= t_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub t0: f64,
    pub t1: f64,
    pub target_di: f64,
    /// Whether the training DI reached `target_di`.
    pub reached: bool,
    /// Disparate impact on the calibration data at these thresholds.
    pub training_di: f64,
}

impl GroupThresholds {
    pub fn threshold(&self, s: u8) -> f64 {
        if s == 0 {
            self.t0
        } else {
            self.t1
        }
    }
}

/// A trained decision rule, possibly wrapped by a mitigation strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CompositeClassifier {
    Plain {
        classifier: ThresholdedClassifier,
    },
    /// Trained without the feature columns in `dropped`, which are removed before scoring.
    DroppedSensitive {
        classifier: ThresholdedClassifier,
        dropped: Vec<usize>,
    },
    TestingCompliant {
        classifier: ThresholdedClassifier,
        sensitive_feature_indices: Vec<usize>,
    },
    /// `models[s]` decides for rows of group `s`.
    SeparateTreatment {
        models: [ThresholdedClassifier; 2],
    },
    PositiveDiscrimination {
        model: Model,
        thresholds: GroupThresholds,
    },
}

/// Copy of `row` with the `S` encoding flipped.
pub fn flip_sensitive(row: &[f64], indices: &[usize]) -> Vec<f64> {
    let mut out = row.to_vec();
    for &i in indices {
        out[i] = 1.0 - out[i];
    }
    out
}

impl CompositeClassifier {
    pub fn strategy(&self) -> Strategy {
        match self {
            CompositeClassifier::Plain { .. } => Strategy::None,
            CompositeClassifier::DroppedSensitive { .. } => Strategy::DropSensitive,
            CompositeClassifier::TestingCompliant { .. } => Strategy::TestingCompliant,
            CompositeClassifier::SeparateTreatment { .. } => Strategy::Separate,
            CompositeClassifier::PositiveDiscrimination { .. } => Strategy::PositiveDiscrimination,
        }
    }

    pub fn thresholds(&self) -> Option<&GroupThresholds> {
        match self {
            CompositeClassifier::PositiveDiscrimination { thresholds, .. } => Some(thresholds),
            _ => None,
        }
    }
}

impl Classifier for CompositeClassifier {
    fn predict(&self, row: &[f64], s: u8) -> u8 {
        match self {
            CompositeClassifier::Plain { classifier } => classifier.predict(row, s),
            CompositeClassifier::DroppedSensitive {
                classifier,
                dropped,
            } => {
                let kept: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !dropped.contains(j))
                    .map(|(_, v)| *v)
                    .collect();
                classifier.predict(&kept, s)
            }
            CompositeClassifier::TestingCompliant {
                classifier,
                sensitive_feature_indices,
            } => {
                let own = classifier.predict(row, s);
                let other = classifier.predict(&flip_sensitive(row, sensitive_feature_indices), 1 - s);
                own.max(other)
            }
            CompositeClassifier::SeparateTreatment { models } => models[s as usize].predict(row, s),
            CompositeClassifier::PositiveDiscrimination { model, thresholds } => {
                u8::from(model.score(row) >= thresholds.threshold(s))
            }
        }
    }
}

/// Wraps `clf` so that its decision is the more favorable of the two values of `S`.
pub fn make_testing_compliant(
    clf: ThresholdedClassifier,
    sensitive_feature_indices: &[usize],
) -> Result<CompositeClassifier> {
    if sensitive_feature_indices.is_empty() {
        return Err(Error::Argument(
            "testing-compliant wrapper needs the sensitive attribute among the features".into(),
        ));
    }
    Ok(CompositeClassifier::TestingCompliant {
        classifier: clf,
        sensitive_feature_indices: sensitive_feature_indices.to_vec(),
    })
}

/// Fraction of rows whose decision changes when only `S` is flipped.
pub fn testing_audit(clf: &dyn Classifier, ds: &EncodedDataset) -> Result<f64> {
    if ds.sensitive_feature_indices.is_empty() {
        return Err(Error::Argument(
            "testing audit needs the sensitive attribute encoded in the features".into(),
        ));
    }
    if ds.n_rows() == 0 {
        return Ok(0.0);
    }
    let flipped = (0..ds.n_rows())
        .filter(|&i| {
            let row = ds.row(i);
            let s = ds.s[i];
            clf.predict(row, s)
                != clf.predict(&flip_sensitive(row, &ds.sensitive_feature_indices), 1 - s)
        })
        .count();
    Ok(flipped as f64 / ds.n_rows() as f64)
}

/// One model per group, each fitted on that group's rows only.
pub fn train_separate(
    ds: &EncodedDataset,
    params: &ModelParams,
    seed: u64,
) -> Result<CompositeClassifier> {
    let mut models = Vec::with_capacity(2);
    for g in 0..=1u8 {
        let part = ds.subset(&ds.group_rows(g));
        let pos = part.y.iter().filter(|&&v| v == 1).count();
        if part.n_rows() < 2 || pos == 0 || pos == part.n_rows() {
            return Err(Error::DegenerateTraining(format!(
                "group s={g} ('{}') has {} rows with {pos} positives",
                ds.group_labels[g as usize],
                part.n_rows()
            )));
        }
        let model = train(&part, params, seed.wrapping_add(g as u64))
            .map_err(|e| match e {
                Error::DegenerateTraining(m) => Error::DegenerateTraining(format!("group s={g}: {m}")),
                other => other,
            })?;
        models.push(ThresholdedClassifier::new(model));
    }
    let m1 = models.pop().unwrap();
    let m0 = models.pop().unwrap();
    Ok(CompositeClassifier::SeparateTreatment { models: [m0, m1] })
}

fn count_at_least(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v < t)
}

/// Lowers the protected group's threshold until the training DI reaches `target_di`.
///
/// The majority threshold stays at 0.5. Candidates for `t0` are 0, 1 and the
/// midpoints between consecutive distinct group-0 scores; the largest one
/// meeting the target is chosen. If no candidate meets it, the one with the
/// highest DI is returned with `reached = false`.
pub fn calibrate_thresholds(
    scorer: &dyn Scorer,
    ds: &EncodedDataset,
    target_di: f64,
) -> Result<GroupThresholds> {
    if !(target_di > 0.0) {
        return Err(Error::Argument(format!("target DI must be positive, got {target_di}")));
    }
    let mut scores0 = Vec::new();
    let mut scores1 = Vec::new();
    for i in 0..ds.n_rows() {
        let v = scorer.score(ds.row(i));
        if ds.s[i] == 0 {
            scores0.push(v);
        } else {
            scores1.push(v);
        }
    }
    if scores0.is_empty() {
        return Err(Error::undefined("classifier_di", "S=0"));
    }
    if scores1.is_empty() {
        return Err(Error::undefined("classifier_di", "S=1"));
    }
    let t1 = 0.5;
    let pos1 = scores1.iter().filter(|&&v| v >= t1).count();
    if pos1 == 0 {
        return Err(Error::undefined("classifier_di", "g=1,S=1"));
    }
    let rate1 = pos1 as f64 / scores1.len() as f64;
    scores0.sort_by(f64::total_cmp);
    let di_at = |t: f64| count_at_least(&scores0, t) as f64 / scores0.len() as f64 / rate1;

    let base = di_at(0.5);
    if base >= target_di {
        return Ok(GroupThresholds {
            t0: 0.5,
            t1,
            target_di,
            reached: true,
            training_di: base,
        });
    }

    let mut uniq = scores0.clone();
    uniq.dedup();
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    if let Some(&t0) = candidates.iter().find(|&&t| di_at(t) >= target_di) {
        return Ok(GroupThresholds {
            t0,
            t1,
            target_di,
            reached: true,
            training_di: di_at(t0),
        });
    }
    // candidates are in decreasing order, so the first maximum is the largest threshold
    let mut best = candidates[0];
    for &t in &candidates {
        if di_at(t) > di_at(best) {
            best = t;
        }
    }
    Ok(GroupThresholds {
        t0: best,
        t1,
        target_di,
        reached: false,
        training_di: di_at(best),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveDiscriminationReport {
    pub thresholds: GroupThresholds,
    pub metrics: EvalMetrics,
    pub di: DIValue,
    pub baseline_metrics: EvalMetrics,
    pub baseline_di: Option<DIValue>,
    /// Calibrated minus baseline false-positive rate, per group.
    pub false_positive_rate_delta: [Option<f64>; 2],
    pub false_positives: [usize; 2],
    pub baseline_false_positives: [usize; 2],
}

/// Evaluates `model` with calibrated thresholds against the same model at (0.5, 0.5).
pub fn positive_discrimination_report(
    model: &Model,
    thresholds: &GroupThresholds,
    ds: &EncodedDataset,
) -> Result<PositiveDiscriminationReport> {
    let calibrated = CompositeClassifier::PositiveDiscrimination {
        model: model.clone(),
        thresholds: *thresholds,
    };
    let baseline = ThresholdedClassifier::new(model.clone());
    let pred = calibrated.predict_dataset(ds);
    let base_pred = baseline.predict_dataset(ds);
    let metrics = evaluate_predictions(&ds.y, &ds.s, &pred)?;
    let baseline_metrics = evaluate_predictions(&ds.y, &ds.s, &base_pred)?;
    let di = disparate_impact_of_predictions(&ds.s, &pred)?;
    let baseline_di = disparate_impact_of_predictions(&ds.s, &base_pred).ok();
    let delta = |g: usize| {
        Some(metrics.groups[g].false_positive_rate? - baseline_metrics.groups[g].false_positive_rate?)
    };
    Ok(PositiveDiscriminationReport {
        thresholds: *thresholds,
        metrics,
        di,
        baseline_metrics,
        baseline_di,
        false_positive_rate_delta: [delta(0), delta(1)],
        false_positives: [0, 1].map(|g| metrics.groups[g].confusion.false_positives),
        baseline_false_positives: [0, 1].map(|g| baseline_metrics.groups[g].confusion.false_positives),
    })
}

/// What a fitting step touched; handed to a [`FitObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Training,
    Calibration,
}

/// Sees every dataset a strategy fits or calibrates on.
pub type FitObserver<'a> = &'a (dyn Fn(FitStage, &EncodedDataset) + Sync);

/// Trains `params` on `ds` under `strategy`.
pub fn fit_strategy(
    ds: &EncodedDataset,
    params: &ModelParams,
    strategy: Strategy,
    target_di: f64,
    seed: u64,
    observer: Option<FitObserver<'_>>,
) -> Result<CompositeClassifier> {
    let observe = |stage, d: &EncodedDataset| {
        if let Some(f) = observer {
            f(stage, d)
        }
    };
    match strategy {
        Strategy::None => {
            observe(FitStage::Training, ds);
            Ok(CompositeClassifier::Plain {
                classifier: ThresholdedClassifier::new(train(ds, params, seed)?),
            })
        }
        Strategy::DropSensitive => {
            let reduced = drop_sensitive(ds);
            observe(FitStage::Training, &reduced);
            Ok(CompositeClassifier::DroppedSensitive {
                classifier: ThresholdedClassifier::new(train(&reduced, params, seed)?),
                dropped: ds.sensitive_feature_indices.clone(),
            })
        }
        Strategy::TestingCompliant => {
            if ds.sensitive_feature_indices.is_empty() {
                return Err(Error::Config(
                    "testing_compliant requires the sensitive attribute among the features".into(),
                ));
            }
            observe(FitStage::Training, ds);
            make_testing_compliant(
                ThresholdedClassifier::new(train(ds, params, seed)?),
                &ds.sensitive_feature_indices,
            )
        }
        Strategy::Separate => {
            observe(FitStage::Training, ds);
            train_separate(ds, params, seed)
        }
        Strategy::PositiveDiscrimination => {
            observe(FitStage::Training, ds);
            let model = train(ds, params, seed)?;
            observe(FitStage::Calibration, ds);
            let thresholds = calibrate_thresholds(&model, ds, target_di)?;
            Ok(CompositeClassifier::PositiveDiscrimination { model, thresholds })
        }
    }
}

pub const SAVED_MODEL_VERSION: u32 = 1;

/// Versioned on-disk form of a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub dataset: String,
    pub feature_names: Vec<String>,
    pub strategy: Strategy,
    pub classifier: CompositeClassifier,
}

impl SavedModel {
    pub fn new(dataset: &str, ds: &EncodedDataset, classifier: CompositeClassifier) -> Self {
        SavedModel {
            format_version: SAVED_MODEL_VERSION,
            dataset: dataset.to_string(),
            feature_names: ds.features.iter().map(|f| f.name.clone()).collect(),
            strategy: classifier.strategy(),
            classifier,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: SavedModel =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if saved.format_version != SAVED_MODEL_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format version {}",
                saved.format_version
            )));
        }
        Ok(saved)
    }

    /// Fails unless `ds` has exactly the features the model was trained against.
    pub fn check_compatible(&self, ds: &EncodedDataset) -> Result<()> {
        let names: Vec<&str> = ds.features.iter().map(|f| f.name.as_str()).collect();
        if names != self.feature_names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Config(format!(
                "model expects {} features {:?}, dataset has {} {:?}",
                self.feature_names.len(),
                self.feature_names,
                names.len(),
                names
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::Strategy;
    use crate::dataset::{FeatureInfo, FeatureKind, Matrix};
    use crate::models::{LRParams, Tree, TreeModel, TreeParams};
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    /// Two features: a score-like value and the `S` encoding.
    fn dataset(rows: &[(f64, u8, u8)]) -> EncodedDataset {
        let x = Matrix::from_rows(
            &rows.iter().map(|&(v, s, _)| vec![v, s as f64]).collect::<Vec<_>>(),
        )
        .unwrap();
        EncodedDataset::new(
            x,
            rows.iter().map(|r| r.2).collect(),
            rows.iter().map(|r| r.1).collect(),
            vec![
                FeatureInfo {
                    name: "v".into(),
                    origin: "v".into(),
                    kind: FeatureKind::Continuous,
                },
                FeatureInfo {
                    name: "sex=M".into(),
                    origin: "sex".into(),
                    kind: FeatureKind::Binary {
                        zero: "F".into(),
                        one: "M".into(),
                    },
                },
            ],
            vec![1],
        )
        .unwrap()
    }

    /// Scores the first feature directly.
    struct Identity;
    impl Scorer for Identity {
        fn score(&self, row: &[f64]) -> f64 {
            row[0]
        }
    }

    /// `g(x) = s`, read from the encoding.
    struct BySex;
    impl Classifier for BySex {
        fn predict(&self, row: &[f64], _s: u8) -> u8 {
            row[1] as u8
        }
    }

    fn stump_on_sex() -> ThresholdedClassifier {
        // leaf 0 for sex <= 0.5, leaf 1 otherwise
        ThresholdedClassifier::new(Model::Tree(TreeModel {
            params: TreeParams::default(),
            n_features: 2,
            tree: Tree {
                nodes: vec![
                    crate::models::Node::Split {
                        feature: 1,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                        n_samples: 2,
                    },
                    crate::models::Node::Leaf {
                        value: 0.0,
                        n_samples: 1,
                    },
                    crate::models::Node::Leaf {
                        value: 1.0,
                        n_samples: 1,
                    },
                ],
            },
        }))
    }

    #[test]
    fn drop_sensitive_removes_block_and_is_idempotent() {
        let ds = dataset(&[(0.1, 0, 0), (0.9, 1, 1)]);
        let once = drop_sensitive(&ds);
        assert_eq!(once.n_features(), 1);
        assert!(once.sensitive_feature_indices.is_empty());
        assert_eq!(once.s, ds.s);
        assert_eq!(drop_sensitive(&once), once);
    }

    #[test]
    fn testing_compliant_takes_the_favorable_decision() {
        let base = stump_on_sex();
        assert_eq!(base.predict(&[0.3, 0.0], 0), 0);
        assert_eq!(base.predict(&[0.3, 1.0], 1), 1);
        let wrapped = make_testing_compliant(base, &[1]).unwrap();
        assert_eq!(wrapped.predict(&[0.3, 0.0], 0), 1);
        assert_eq!(wrapped.predict(&[0.3, 1.0], 1), 1);
    }

    #[test]
    fn testing_audit_extremes() {
        let ds = dataset(&[(0.1, 0, 0), (0.9, 1, 1), (0.4, 0, 1), (0.6, 1, 0)]);
        assert_eq!(testing_audit(&BySex, &ds).unwrap(), 1.0);
        let wrapped = make_testing_compliant(stump_on_sex(), &[1]).unwrap();
        assert_eq!(testing_audit(&wrapped, &ds).unwrap(), 0.0);
        assert!(make_testing_compliant(stump_on_sex(), &[]).is_err());
        assert!(testing_audit(&BySex, &drop_sensitive(&ds)).is_err());
    }

    #[test]
    fn separate_treatment_learns_opposite_rules() {
        // group 0: y = 1 iff v > 0; group 1: y = 1 iff v < 0
        let rows = [
            (-1.0, 0, 0),
            (1.0, 0, 1),
            (-2.0, 0, 0),
            (2.0, 0, 1),
            (-1.0, 1, 1),
            (1.0, 1, 0),
            (-2.0, 1, 1),
            (2.0, 1, 0),
        ];
        let ds = dataset(&rows);
        let params = ModelParams::Logistic(LRParams {
            l2_penalty: 1e-3,
            ..Default::default()
        });
        let sep = train_separate(&ds, &params, 0).unwrap();
        assert_eq!(sep.predict_dataset(&ds), ds.y);
        // a single linear model in (v, s) cannot represent the interaction
        let single = fit_strategy(&ds, &params, Strategy::None, 0.8, 0, None).unwrap();
        assert_ne!(single.predict_dataset(&ds), ds.y);
        // routing: group-s rows get group-s model decisions
        let CompositeClassifier::SeparateTreatment { models } = &sep else {
            panic!()
        };
        for i in 0..ds.n_rows() {
            assert_eq!(sep.predict(ds.row(i), ds.s[i]), models[ds.s[i] as usize].predict(ds.row(i), ds.s[i]));
        }
    }

    #[test]
    fn separate_names_degenerate_group() {
        let ds = dataset(&[(0.1, 0, 0), (0.2, 0, 0), (0.9, 1, 1), (0.3, 1, 0)]);
        match train_separate(&ds, &ModelParams::Logistic(LRParams::default()), 0) {
            Err(Error::DegenerateTraining(m)) => assert!(m.contains("s=0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn already_fair_scores_keep_default_thresholds() {
        // group 0: 9 of 10 above 0.5; group 1: all 10 above -> DI 0.9
        let mut rows: Vec<(f64, u8, u8)> = (0..10).map(|i| (if i < 9 { 0.7 } else { 0.2 }, 0, 0)).collect();
        rows.extend((0..10).map(|_| (0.8, 1, 1)));
        let t = calibrate_thresholds(&Identity, &dataset(&rows), 0.8).unwrap();
        assert_eq!((t.t0, t.t1), (0.5, 0.5));
        assert!(t.reached);
    }

    #[test]
    fn calibration_lowers_group_zero_threshold() {
        let mut rows: Vec<(f64, u8, u8)> = (0..10).map(|i| (i as f64 / 10.0, 0, 0)).collect();
        rows.extend((0..10).map(|i| (0.3 + i as f64 / 20.0, 1, 1)));
        let ds = dataset(&rows);
        let t = calibrate_thresholds(&Identity, &ds, 0.8).unwrap();
        // group 1 positive rate at 0.5: scores 0.5..0.75 -> 6 of 10
        // DI >= 0.8 needs at least 4.8 -> 5 of 10 group-0 rows: scores >= 0.5 is 5 rows
        assert!(t.reached);
        assert!(t.training_di >= 0.8);
        assert!(t.t0 <= 0.5);
    }

    #[test]
    fn unreachable_target_returns_best_effort() {
        let mut rows: Vec<(f64, u8, u8)> = (0..4).map(|i| (i as f64 / 10.0, 0, 0)).collect();
        rows.extend((0..4).map(|_| (0.9, 1, 1)));
        let t = calibrate_thresholds(&Identity, &dataset(&rows), 1.5).unwrap();
        assert!(!t.reached);
        assert_eq!(t.training_di, 1.0);
        assert_eq!(t.t0, 0.0);
    }

    #[test]
    fn default_thresholds_match_plain_evaluation() {
        let rows: Vec<(f64, u8, u8)> = (0..20).map(|i| ((i % 10) as f64 / 10.0, (i % 2) as u8, (i % 3 == 0) as u8)).collect();
        let ds = dataset(&rows);
        let model = Model::Tree(TreeModel {
            params: TreeParams::default(),
            n_features: 2,
            tree: Tree::constant(0.6, 1),
        });
        let t = GroupThresholds { t0: 0.5, t1: 0.5, target_di: 0.8, reached: true, training_di: 1.0 };
        let r = positive_discrimination_report(&model, &t, &ds).unwrap();
        assert_eq!(r.metrics, r.baseline_metrics);
        assert_eq!(r.false_positive_rate_delta, [Some(0.0), Some(0.0)]);
    }

    #[test]
    fn saved_model_roundtrip() {
        let ds = dataset(&[(0.1, 0, 0), (0.9, 1, 1)]);
        let clf = make_testing_compliant(stump_on_sex(), &[1]).unwrap();
        let saved = SavedModel::new("toy", &ds, clf);
        let back = SavedModel::from_json(&saved.to_json().unwrap()).unwrap();
        assert_eq!(back, saved);
        back.check_compatible(&ds).unwrap();
        assert!(back.check_compatible(&drop_sensitive(&ds)).is_err());
    }

    fn scored_groups() -> impl proptest::strategy::Strategy<Value = Vec<(f64, u8, u8)>> {
        prop::collection::vec((0u32..40, 0u8..2, 0u8..2), 4..80).prop_map(|v| {
            let mut rows: Vec<(f64, u8, u8)> =
                v.into_iter().map(|(q, s, y)| (q as f64 / 40.0, s, y)).collect();
            rows.push((0.95, 1, 1));
            rows.push((0.05, 0, 0));
            rows
        })
    }

    proptest! {
        #[test]
        fn calibration_matches_exhaustive_scan(rows in scored_groups(), target in 0.3f64..1.2) {
            let ds = dataset(&rows);
            let t = calibrate_thresholds(&Identity, &ds, target).unwrap();
            // oracle: scan every group-0 positive count reachable by some threshold
            let rate1 = rows.iter().filter(|r| r.1 == 1 && r.0 >= 0.5).count() as f64
                / rows.iter().filter(|r| r.1 == 1).count() as f64;
            let g0: Vec<f64> = rows.iter().filter(|r| r.1 == 0).map(|r| r.0).collect();
            let di = |thr: f64| g0.iter().filter(|&&v| v >= thr).count() as f64 / g0.len() as f64 / rate1;
            let mut grid: Vec<f64> = g0.clone();
            grid.extend([0.0, 0.5, 1.0, 1.01]);
            let calibrated = di(t.t0);
            prop_assert!((calibrated - t.training_di).abs() < 1e-12);
            if di(0.5) >= target {
                prop_assert_eq!(t.t0, 0.5);
            } else if t.reached {
                prop_assert!(calibrated >= target);
                // no higher threshold reaches the target with fewer group-0 positives
                for &thr in &grid {
                    if thr > t.t0 && di(thr) >= target {
                        prop_assert!(di(thr) == calibrated);
                    }
                }
            } else {
                for &thr in &grid {
                    prop_assert!(di(thr) < target);
                    prop_assert!(di(thr) <= calibrated);
                }
            }
        }

        #[test]
        fn lowering_t0_never_lowers_di(rows in scored_groups(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let ds = dataset(&rows);
            let model = Identity;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let di_at = |t0: f64| {
                let pred: Vec<u8> = (0..ds.n_rows()).map(|i| {
                    let t = if ds.s[i] == 0 { t0 } else { 0.5 };
                    u8::from(model.score(ds.row(i)) >= t)
                }).collect();
                disparate_impact_of_predictions(&ds.s, &pred).unwrap().value
            };
            prop_assert!(di_at(lo) >= di_at(hi));
        }

        #[test]
        fn testing_compliant_is_flip_invariant_and_favorable(
            rows in scored_groups(),
            w in -3.0f64..3.0, ws in -3.0f64..3.0, b in -1.0f64..1.0,
        ) {
            let ds = dataset(&rows);
            let lr = crate::models::LogisticModel {
                params: LRParams::default(),
                means: vec![0.0, 0.0],
                scales: vec![1.0, 1.0],
                intercept: b,
                weights: vec![w, ws],
                loss_history: vec![],
            };
            let base = ThresholdedClassifier::new(Model::Logistic(lr));
            let wrapped = make_testing_compliant(base.clone(), &ds.sensitive_feature_indices).unwrap();
            prop_assert_eq!(testing_audit(&wrapped, &ds).unwrap(), 0.0);
            for i in 0..ds.n_rows() {
                let row = ds.row(i);
                let s = ds.s[i];
                let flipped = flip_sensitive(row, &ds.sensitive_feature_indices);
                prop_assert_eq!(wrapped.predict(row, s), wrapped.predict(&flipped, 1 - s));
                prop_assert!(wrapped.predict(row, s) >= base.predict(row, s));
            }
        }
    }
}
