use std::collections::HashMap;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{
    aggregate, BaselineRecord, ExperimentReport, FailedExperiment, FoldRecord, Reference,
    Summary, SuiteReport, REPORT_SCHEMA_VERSION,
};
use crate::dataset::{balance_groups, kfold, load_dataset, DatasetConfig, EncodedDataset, ValueRef};
use crate::error::{Error, Result};
use crate::inference::{confidence_interval, di_confidence_interval};
use crate::metrics::{count_groups, disparate_impact_of_predictions, rate_ratio, Metric, RateKind};
use crate::mitigation::{fit_strategy, testing_audit, CompositeClassifier, FitStage};
use crate::models::{evaluate_predictions, Classifier, ThresholdedClassifier};

/// Sees every dataset fitted or calibrated on, with the fold it belongs to.
pub type FoldObserver<'a> = &'a (dyn Fn(usize, FitStage, &EncodedDataset) + Sync);

/// SplitMix64 finalizer applied to `seed + stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An encoded dataset together with the names reports carry.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub sensitive: ValueRef,
    pub data: EncodedDataset,
}

impl PreparedData {
    pub fn load(cfg: &ExperimentConfig, data_dir: Option<&Path>) -> Result<Self> {
        let mut ds_cfg = DatasetConfig::resolve(&cfg.dataset)?;
        if let Some(s) = &cfg.sensitive {
            ds_cfg = ds_cfg.with_sensitive(&s.column, &s.value);
        }
        let loaded = load_dataset(&ds_cfg, data_dir)?;
        Ok(PreparedData {
            name: ds_cfg.name,
            sensitive: ds_cfg.sensitive,
            data: loaded.data,
        })
    }
}

pub fn run_cross_validation(
    cfg: &ExperimentConfig,
    data_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let prepared = PreparedData::load(cfg, data_dir)?;
    run_cross_validation_on(cfg, &prepared, None)
}

/// k-fold cross-validation of one configuration on already loaded data.
/// Folds run in parallel; the report lists them in order.
pub fn run_cross_validation_on(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    observer: Option<FoldObserver<'_>>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = &prepared.data;
    let plan = kfold(data.n_rows(), cfg.k, cfg.seed)?;
    let full_counts = count_groups(&data.y, &data.s, None)?;
    let full_ref = di_confidence_interval(&full_counts, cfg.level)?;

    let folds = (0..cfg.k)
        .into_par_iter()
        .map(|fold| {
            let train = data.subset(&plan.train_indices(fold));
            let test = data.subset(&plan.test_indices(fold));
            run_fold(cfg, fold, train, &test, observer).map_err(|e| e.in_fold(fold))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let per_fold_ref: Vec<f64> = folds.iter().filter_map(|f| f.ref_di.map(|c| c.point)).collect();
    info!("{} on {}: {} folds done", cfg.cell(), prepared.name, folds.len());
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        dataset: prepared.name.clone(),
        sensitive: prepared.sensitive.clone(),
        group_labels: data.group_labels.clone(),
        n_rows: data.n_rows(),
        aggregate: aggregate(&folds),
        folds,
        reference: Reference {
            full: full_ref,
            per_fold: Summary::of(&per_fold_ref),
        },
    })
}

fn run_fold(
    cfg: &ExperimentConfig,
    fold: usize,
    train: EncodedDataset,
    test: &EncodedDataset,
    observer: Option<FoldObserver<'_>>,
) -> Result<FoldRecord> {
    let fold_seed = derive_seed(cfg.seed, fold as u64);
    let train = if cfg.balance_training {
        balance_groups(&train, derive_seed(fold_seed, 1))?
    } else {
        train
    };
    let observe = |stage: FitStage, d: &EncodedDataset| {
        if let Some(f) = observer {
            f(fold, stage, d)
        }
    };
    let clf = fit_strategy(
        &train,
        &cfg.model,
        cfg.strategy,
        cfg.target_di,
        fold_seed,
        Some(&observe),
    )?;

    let pred = clf.predict_dataset(test);
    let metrics = evaluate_predictions(&test.y, &test.s, &pred)?;
    let counts = count_groups(&test.y, &test.s, Some(&pred))?;
    let di = disparate_impact_of_predictions(&test.s, &pred).ok().map(|v| v.value);
    let di_ci = confidence_interval(&counts, Metric::ClassifierDi, cfg.level).ok();
    if di.is_some() && di_ci.is_none() {
        warn!("fold {fold}: classifier DI interval undefined");
    }
    let tp_ratio = rate_ratio(&counts, RateKind::TruePositive).ok().map(|v| v.value);
    let tn_ratio = rate_ratio(&counts, RateKind::TrueNegative).ok().map(|v| v.value);
    let flip_fraction = if test.sensitive_feature_indices.is_empty() {
        None
    } else {
        Some(testing_audit(&clf, test)?)
    };
    let ref_di = di_confidence_interval(&count_groups(&test.y, &test.s, None)?, cfg.level).ok();
    let baseline = match &clf {
        CompositeClassifier::PositiveDiscrimination { model, .. } => {
            let base_pred = ThresholdedClassifier::new(model.clone()).predict_dataset(test);
            Some(BaselineRecord {
                metrics: evaluate_predictions(&test.y, &test.s, &base_pred)?,
                di: disparate_impact_of_predictions(&test.s, &base_pred).ok().map(|v| v.value),
            })
        }
        _ => None,
    };
    Ok(FoldRecord {
        fold,
        fold_seed,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        metrics,
        di,
        di_ci,
        tp_ratio,
        tn_ratio,
        flip_fraction,
        ref_di,
        thresholds: clf.thresholds().copied(),
        baseline,
    })
}

/// Category and message of a failed configuration.
type Failure = (String, String);

fn describe(e: Error) -> Failure {
    (e.category().to_string(), e.to_string())
}

/// Runs every configuration, loading each dataset once and running identical
/// configurations (ignoring their names) once. A failing configuration is
/// recorded and the rest still run.
pub fn run_suite(configs: &[ExperimentConfig], data_dir: Option<&Path>) -> SuiteReport {
    let mut datasets: HashMap<String, std::result::Result<PreparedData, Failure>> = HashMap::new();
    let mut done: Vec<(ExperimentConfig, std::result::Result<ExperimentReport, Failure>)> = Vec::new();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for cfg in configs {
        let unnamed = ExperimentConfig {
            name: String::new(),
            ..cfg.clone()
        };
        let outcome = match done.iter().find(|(c, _)| *c == unnamed) {
            Some((_, r)) => r.clone(),
            None => {
                let key = serde_json::to_string(&(&cfg.dataset, &cfg.sensitive))
                    .unwrap_or_else(|_| cfg.dataset.clone());
                let prepared = datasets
                    .entry(key)
                    .or_insert_with(|| PreparedData::load(cfg, data_dir).map_err(describe));
                let r = match prepared {
                    Ok(p) => run_cross_validation_on(cfg, p, None).map_err(describe),
                    Err(e) => Err(e.clone()),
                };
                done.push((unnamed, r.clone()));
                r
            }
        };
        match outcome {
            Ok(mut r) => {
                r.config.name = cfg.name.clone();
                reports.push(r);
            }
            Err((category, error)) => {
                warn!("{} failed: {error}", cfg.cell());
                failures.push(FailedExperiment {
                    config: cfg.clone(),
                    category,
                    error,
                });
            }
        }
    }
    SuiteReport {
        schema_version: REPORT_SCHEMA_VERSION,
        reports,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureInfo, FeatureKind, Matrix};
    use crate::harness::summarize;
    use crate::mitigation::Strategy;
    use crate::models::ModelFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;
    use std::sync::Mutex;

    /// Two noisy features plus an encoded `S` column; the label leans on `S`.
    fn synthetic(n: usize, seed: u64) -> PreparedData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let g = u8::from(rng.gen_bool(0.6));
            let a: f64 = rng.gen_range(-2.0..2.0);
            // a unique id column lets the leakage check recognize rows
            let id = i as f64;
            let logit = 1.5 * a + if g == 1 { 0.8 } else { -0.8 };
            let label = u8::from(rng.gen::<f64>() < 1.0 / (1.0 + (-logit).exp()));
            rows.push(vec![a, id, g as f64]);
            y.push(label);
            s.push(g);
        }
        let feature = |name: &str, kind| FeatureInfo {
            name: name.into(),
            origin: name.into(),
            kind,
        };
        let data = EncodedDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            y,
            s,
            vec![
                feature("a", FeatureKind::Continuous),
                feature("id", FeatureKind::Continuous),
                feature(
                    "group",
                    FeatureKind::Binary {
                        zero: "minority".into(),
                        one: "majority".into(),
                    },
                ),
            ],
            vec![2],
        )
        .unwrap();
        PreparedData {
            name: "synthetic".into(),
            sensitive: ValueRef {
                column: "group".into(),
                value: "minority".into(),
            },
            data,
        }
    }

    fn config(strategy: Strategy) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("t", "synthetic", ModelFamily::Logistic, strategy, 5);
        c.k = 4;
        c
    }

    #[test]
    fn empty_suite_is_empty() {
        let r = run_suite(&[], None);
        assert!(r.reports.is_empty() && r.failures.is_empty());
    }

    #[test]
    fn suite_records_failures_and_continues() {
        let mut bad = config(Strategy::None);
        bad.dataset = "no-such-dataset".into();
        let r = run_suite(&[bad.clone(), bad], None);
        assert_eq!(r.failures.len(), 2);
        assert_eq!(r.failures[0].category, "config");
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: HashSet<u64> = (0..100).map(|f| derive_seed(7, f)).collect();
        assert_eq!(seeds.len(), 100);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn test_rows_never_reach_training() {
        let p = synthetic(400, 1);
        for strategy in Strategy::ALL {
            let seen: Mutex<Vec<(usize, HashSet<u64>)>> = Mutex::new(Vec::new());
            let observer = |fold: usize, _stage: FitStage, d: &EncodedDataset| {
                let ids = d.x.rows().map(|r| r[1] as u64).collect();
                seen.lock().unwrap().push((fold, ids));
            };
            let cfg = config(strategy);
            run_cross_validation_on(&cfg, &p, Some(&observer)).unwrap();
            let plan = kfold(400, cfg.k, cfg.seed).unwrap();
            let seen = seen.into_inner().unwrap();
            assert!(!seen.is_empty());
            for (fold, ids) in seen {
                for t in plan.test_indices(fold) {
                    assert!(!ids.contains(&(t as u64)), "{strategy}: row {t} leaked into fold {fold}");
                }
            }
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let p = synthetic(300, 2);
        let cfg = config(Strategy::PositiveDiscrimination);
        let a = run_cross_validation_on(&cfg, &p, None).unwrap();
        let b = run_cross_validation_on(&cfg, &p, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.len(), 4);
        assert!(a.folds.iter().all(|f| f.thresholds.is_some() && f.baseline.is_some()));
        assert_eq!(a.folds.iter().map(|f| f.n_test).sum::<usize>(), 300);
    }

    #[test]
    fn summary_has_folds_mean_and_reference() {
        let p = synthetic(300, 3);
        let r = run_cross_validation_on(&config(Strategy::None), &p, None).unwrap();
        let rows = summarize(&r).unwrap();
        assert_eq!(rows.len(), r.config.k + 2);
        assert_eq!(rows[r.config.k].kind, "mean");
        assert_eq!(rows[r.config.k + 1].kind, "ref");
        assert_eq!(rows[r.config.k + 1].di, Some(r.reference.full.point));
        let mean_acc = r.folds.iter().map(|f| f.metrics.overall.accuracy.unwrap()).sum::<f64>() / 4.0;
        assert!((rows[r.config.k].accuracy.unwrap() - mean_acc).abs() < 1e-12);
    }

    #[test]
    fn flip_fraction_tracks_strategy() {
        let p = synthetic(400, 4);
        let compliant = run_cross_validation_on(&config(Strategy::TestingCompliant), &p, None).unwrap();
        let dropped = run_cross_validation_on(&config(Strategy::DropSensitive), &p, None).unwrap();
        for f in compliant.folds.iter().chain(&dropped.folds) {
            assert_eq!(f.flip_fraction, Some(0.0));
        }
    }

    #[test]
    fn balanced_training_folds_have_equal_groups() {
        let p = synthetic(400, 5);
        let mut cfg = config(Strategy::None);
        cfg.balance_training = true;
        let sizes = Mutex::new(Vec::new());
        let observer = |_: usize, _: FitStage, d: &EncodedDataset| {
            sizes.lock().unwrap().push((d.group_rows(0).len(), d.group_rows(1).len()));
        };
        run_cross_validation_on(&cfg, &p, Some(&observer)).unwrap();
        for (a, b) in sizes.into_inner().unwrap() {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn csv_is_long_format() {
        let p = synthetic(200, 6);
        let r = run_cross_validation_on(&config(Strategy::None), &p, None).unwrap();
        let mut buf = Vec::new();
        crate::harness::write_csv(&[r.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "experiment,model,strategy,sensitive,fold,metric,value");
        assert!(text.contains("t,LR,none,group,0,accuracy,"));
        assert!(text.contains(&format!("t,LR,none,group,ref,ref_di,{}", r.reference.full.point)));
    }
}
