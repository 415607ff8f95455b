use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fairaudit_core::dataset::{load_dataset, DatasetConfig, LoadedDataset, ValueRef};
use fairaudit_core::harness::{
    preset, run_cross_validation_on, run_suite, write_csv, ExperimentConfig, PreparedData,
    PRESETS,
};
use fairaudit_core::inference::{
    bootstrap_ci, confidence_interval, di_level_test, DiTarget, Direction, MIN_REPLICATES,
};
use fairaudit_core::metrics::{count_groups, Metric};
use fairaudit_core::mitigation::{fit_strategy, testing_audit, SavedModel, Strategy};
use fairaudit_core::models::{Classifier, ModelParams};
use fairaudit_core::{Error, Result};
use log::info;
use serde::Deserialize;

use crate::output::{
    emit, AuditReport, BootstrapComparison, MitigationReport, TestEntry, SCHEMA_VERSION,
};
use crate::{AuditArgs, BootstrapArgs, DataArgs, ExperimentArgs, MitigateArgs, ModelArgs};
use crate::{PredictionArgs, TrainArgs};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn sensitive_override(d: &DataArgs) -> Option<ValueRef> {
    match (&d.sensitive, &d.protected) {
        (Some(column), Some(value)) => Some(ValueRef {
            column: column.clone(),
            value: value.clone(),
        }),
        _ => None,
    }
}

fn load(d: &DataArgs) -> Result<LoadedDataset> {
    let mut cfg = DatasetConfig::resolve(&d.dataset)?;
    if let Some(s) = sensitive_override(d) {
        cfg = cfg.with_sensitive(&s.column, &s.value);
    }
    load_dataset(&cfg, d.data_dir.as_deref())
}

/// Reads a single-column 0/1 file; a non-numeric first line is taken as a header.
fn read_predictions(path: &Path, n_rows: usize) -> Result<Vec<u8>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut out = Vec::with_capacity(n_rows);
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if record.len() != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected one column, found {}", record.len()),
            });
        }
        match record[0].trim() {
            "0" => out.push(0),
            "1" => out.push(1),
            _ if i == 0 => continue,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected 0 or 1, found '{other}'"),
                })
            }
        }
    }
    if out.len() != n_rows {
        return Err(Error::Argument(format!(
            "predictions file has {} rows but the dataset has {n_rows} after preprocessing",
            out.len()
        )));
    }
    Ok(out)
}

struct Decisions {
    values: Vec<u8>,
    source: String,
    flip_fraction: Option<f64>,
}

/// Decisions from a predictions file, a saved model, or the config's prediction column, in that order.
fn decisions(p: &PredictionArgs, loaded: &LoadedDataset) -> Result<Option<Decisions>> {
    let ds = &loaded.data;
    if let Some(path) = &p.predictions {
        return Ok(Some(Decisions {
            values: read_predictions(path, ds.n_rows())?,
            source: format!("file:{}", path.display()),
            flip_fraction: None,
        }));
    }
    if let Some(path) = &p.model {
        let saved = SavedModel::from_json(&fs::read_to_string(path).map_err(io_err(path))?)?;
        saved.check_compatible(ds)?;
        let flip_fraction = if ds.sensitive_feature_indices.is_empty() {
            None
        } else {
            Some(testing_audit(&saved.classifier, ds)?)
        };
        return Ok(Some(Decisions {
            values: saved.classifier.predict_dataset(ds),
            source: format!("model:{}", path.display()),
            flip_fraction,
        }));
    }
    Ok(loaded.predictions.clone().map(|values| Decisions {
        values,
        source: format!(
            "column:{}",
            loaded.config.prediction.as_ref().map_or("", |p| p.column.as_str())
        ),
        flip_fraction: None,
    }))
}

pub fn audit(a: &AuditArgs) -> Result<()> {
    check_level("level", a.level)?;
    check_level("alpha", a.alpha)?;
    if let Some(beta) = a.beta {
        if !(beta > 0.0) {
            return Err(Error::Argument(format!("beta must be positive, got {beta}")));
        }
    }
    let loaded = load(&a.data)?;
    let ds = &loaded.data;
    let dec = decisions(&a.predictions, &loaded)?;
    let counts = count_groups(&ds.y, &ds.s, dec.as_ref().map(|d| d.values.as_slice()))?;
    let ci = |m| confidence_interval(&counts, m, a.level);
    let data_di = ci(Metric::DataDi)?;
    let (classifier_di, tp_ratio, tn_ratio) = match &dec {
        Some(_) => (
            Some(ci(Metric::ClassifierDi)?),
            Some(ci(Metric::TpRatio)?),
            Some(ci(Metric::TnRatio)?),
        ),
        None => (None, None, None),
    };
    let mut tests = Vec::new();
    if let Some(beta) = a.beta {
        let targets: &[DiTarget] = if dec.is_some() {
            &[DiTarget::Data, DiTarget::Classifier]
        } else {
            &[DiTarget::Data]
        };
        for &target in targets {
            for direction in [Direction::FairnessEvidence, Direction::DiscriminationEvidence] {
                tests.push(TestEntry {
                    target,
                    result: di_level_test(&counts, target, beta, a.alpha, direction)?,
                });
            }
        }
    }
    let report = AuditReport {
        schema_version: SCHEMA_VERSION,
        dataset: loaded.config.name.clone(),
        sensitive: loaded.config.sensitive.clone(),
        group_labels: ds.group_labels.clone(),
        n_rows: ds.n_rows(),
        level: a.level,
        prediction_source: dec.as_ref().map(|d| d.source.clone()),
        data_di,
        classifier_di,
        tp_ratio,
        tn_ratio,
        flip_fraction: dec.and_then(|d| d.flip_fraction),
        tests,
    };
    emit(&a.out, &report)
}

fn model_params(m: &ModelArgs) -> Result<ModelParams> {
    let params = match &m.params {
        None => m.model.default_params(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let p: ModelParams = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if p.family() != m.model {
                return Err(Error::Config(format!(
                    "{} holds {} parameters but --model is {}",
                    path.display(),
                    p.family(),
                    m.model
                )));
            }
            p
        }
    };
    params.validate()?;
    Ok(params)
}

fn experiment_config(
    name: &str,
    d: &DataArgs,
    m: &ModelArgs,
    strategy: Strategy,
    target_di: f64,
) -> Result<ExperimentConfig> {
    check_level("level", m.level)?;
    let mut cfg = ExperimentConfig::new(name, &d.dataset, m.model, strategy, m.seed);
    cfg.sensitive = sensitive_override(d);
    cfg.model = model_params(m)?;
    cfg.k = m.k;
    cfg.level = m.level;
    cfg.target_di = target_di;
    cfg.balance_training = m.balance_training;
    cfg.validate()?;
    Ok(cfg)
}

fn save_model(path: &Path, cfg: &ExperimentConfig, prepared: &PreparedData) -> Result<()> {
    let clf = fit_strategy(
        &prepared.data,
        &cfg.model,
        cfg.strategy,
        cfg.target_di,
        cfg.seed,
        None,
    )?;
    let saved = SavedModel::new(&prepared.name, &prepared.data, clf);
    fs::write(path, saved.to_json()? + "\n").map_err(io_err(path))?;
    info!("model saved to {}", path.display());
    Ok(())
}

pub fn train_eval(a: &TrainArgs) -> Result<()> {
    let cfg = experiment_config("train-eval", &a.data, &a.model, Strategy::None, 0.8)?;
    let prepared = PreparedData::load(&cfg, a.data.data_dir.as_deref())?;
    let report = run_cross_validation_on(&cfg, &prepared, None)?;
    if let Some(path) = &a.model.save_model {
        save_model(path, &cfg, &prepared)?;
    }
    emit(&a.out, &report)
}

pub fn mitigate(a: &MitigateArgs) -> Result<()> {
    let cfg = experiment_config("mitigate", &a.data, &a.model, a.strategy, a.target_di)?;
    let base_cfg = ExperimentConfig {
        strategy: Strategy::None,
        ..cfg.clone()
    };
    let prepared = PreparedData::load(&cfg, a.data.data_dir.as_deref())?;
    let baseline = run_cross_validation_on(&base_cfg, &prepared, None)?;
    let mitigated = run_cross_validation_on(&cfg, &prepared, None)?;
    if let Some(path) = &a.model.save_model {
        save_model(path, &cfg, &prepared)?;
    }
    let mean_change: BTreeMap<String, f64> = mitigated
        .aggregate
        .iter()
        .filter_map(|(k, s)| Some((k.clone(), s.mean - baseline.aggregate.get(k)?.mean)))
        .collect();
    emit(
        &a.out,
        &MitigationReport {
            schema_version: SCHEMA_VERSION,
            strategy: a.strategy,
            baseline,
            mitigated,
            mean_change,
        },
    )
}

#[derive(Deserialize)]
struct ExperimentFile {
    experiments: Vec<ExperimentConfig>,
}

fn experiment_configs(reference: &str, seed: u64) -> Result<(String, Vec<ExperimentConfig>)> {
    if PRESETS.contains(&reference) {
        return Ok((reference.to_string(), preset(reference, seed)?));
    }
    let path = PathBuf::from(reference);
    if !path.is_file() {
        // reports the valid preset names
        return preset(reference, seed).map(|c| (reference.to_string(), c));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let file: ExperimentFile = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
        _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
    };
    let stem = path
        .file_stem()
        .map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned());
    Ok((stem, file.experiments))
}

/// Process exit code for an error category: 1 usage/IO/config, 2 undefined metric, 3 degenerate training.
pub fn category_code(category: &str) -> u8 {
    match category {
        "undefined_metric" | "degenerate_variance" | "instability" => 2,
        "degenerate_training" => 3,
        _ => 1,
    }
}

pub fn experiment(a: &ExperimentArgs) -> Result<u8> {
    let (stem, mut configs) = experiment_configs(&a.preset, a.seed)?;
    for c in &mut configs {
        c.seed = a.seed;
        if let Some(k) = a.k {
            c.k = k;
        }
        c.validate()?;
    }
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let suite = run_suite(&configs, a.data_dir.as_deref());

    let json_path = a.out_dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&suite).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(&json_path, text + "\n").map_err(io_err(&json_path))?;
    let csv_path = a.out_dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(&suite.reports, file)?;

    println!("{}", crate::output::suite_table(&suite));
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    for f in &suite.failures {
        eprintln!("error: {} ({}): {}", f.config.cell(), f.config.dataset, f.error);
    }
    // the suite keeps going past failures; the exit code reports the first one
    Ok(suite.failures.first().map_or(0, |f| category_code(&f.category)))
}

pub fn bootstrap_compare(a: &BootstrapArgs) -> Result<()> {
    check_level("level", a.level)?;
    if a.replicates < MIN_REPLICATES {
        return Err(Error::Argument(format!(
            "need at least {MIN_REPLICATES} replicates, got {}",
            a.replicates
        )));
    }
    let loaded = load(&a.data)?;
    let ds = &loaded.data;
    let dec = decisions(&a.predictions, &loaded)?;
    if a.metric.needs_predictions() && dec.is_none() {
        return Err(Error::Config(format!(
            "{} needs decisions: pass --predictions or --model, or use a config with a prediction column",
            a.metric
        )));
    }
    let yhat = dec.as_ref().map(|d| d.values.as_slice());
    let counts = count_groups(&ds.y, &ds.s, yhat)?;
    let theoretical = confidence_interval(&counts, a.metric, a.level)?;
    let bootstrap = bootstrap_ci(&ds.y, &ds.s, yhat, a.metric, a.replicates, a.level, a.seed)?;
    let report = BootstrapComparison {
        schema_version: SCHEMA_VERSION,
        dataset: loaded.config.name.clone(),
        sensitive: loaded.config.sensitive.clone(),
        metric: a.metric,
        n_rows: ds.n_rows(),
        level: a.level,
        lower_difference: (bootstrap.ci.lower - theoretical.lower).abs(),
        upper_difference: (bootstrap.ci.upper - theoretical.upper).abs(),
        theoretical,
        bootstrap,
    };
    emit(&a.out, &report)
}
