use serde::{Deserialize, Serialize};

use crate::dataset::ValueRef;
use crate::error::{Error, Result};
use crate::mitigation::Strategy;
use crate::models::{ModelFamily, ModelParams};

fn default_k() -> usize {
    10
}

fn default_target() -> f64 {
    0.8
}

fn default_level() -> f64 {
    0.95
}

/// One cross-validated (dataset, model, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Label carried into reports, usually the preset name.
    pub name: String,
    /// Dataset config reference: built-in name, file path, or name in the config directory.
    pub dataset: String,
    /// Overrides the dataset config's sensitive column and protected value.
    #[serde(default)]
    pub sensitive: Option<ValueRef>,
    pub model: ModelParams,
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_di: f64,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Subsample the majority group of every training fold down to the minority size.
    #[serde(default)]
    pub balance_training: bool,
}

impl ExperimentConfig {
    pub fn new(name: &str, dataset: &str, family: ModelFamily, strategy: Strategy, seed: u64) -> Self {
        ExperimentConfig {
            name: name.into(),
            dataset: dataset.into(),
            sensitive: None,
            model: family.default_params(),
            strategy,
            k: default_k(),
            seed,
            target_di: default_target(),
            level: default_level(),
            balance_training: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.target_di > 0.0) {
            return Err(Error::Config("target_di must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Short label such as `GB/separate`.
    pub fn cell(&self) -> String {
        format!("{}/{}", self.model.family(), self.strategy)
    }
}

pub const PRESETS: &[&str] = &[
    "fig3",
    "fig4",
    "fig5",
    "fig6_top",
    "fig6_bottom",
    "fig7_top",
    "fig7_bottom",
    "fig8",
];

/// Experiment grids reproducing each figure's data.
pub fn preset(name: &str, seed: u64) -> Result<Vec<ExperimentConfig>> {
    let each = |dataset: &str, strategies: &[Strategy]| -> Vec<ExperimentConfig> {
        strategies
            .iter()
            .flat_map(|&st| {
                ModelFamily::ALL
                    .into_iter()
                    .map(move |f| ExperimentConfig::new(name, dataset, f, st, seed))
            })
            .collect()
    };
    let configs = match name {
        "fig3" => each("adult", &[Strategy::None]),
        "fig4" => {
            let mut v = each("adult", &[Strategy::None]);
            v.extend(each("adult-ethnic", &[Strategy::None]));
            v
        }
        "fig5" => {
            let mut v = each("adult", &[Strategy::None]);
            for c in &mut v {
                c.balance_training = true;
            }
            v
        }
        "fig6_top" => each("adult", &[Strategy::None, Strategy::DropSensitive]),
        "fig6_bottom" => each("adult", &[Strategy::None, Strategy::TestingCompliant]),
        "fig7_top" => each("adult", &[Strategy::None, Strategy::Separate]),
        "fig7_bottom" => each("adult", &[Strategy::None, Strategy::PositiveDiscrimination]),
        "fig8" => vec![
            ExperimentConfig::new(name, "adult", ModelFamily::Gbm, Strategy::None, seed),
            ExperimentConfig::new(name, "adult", ModelFamily::Gbm, Strategy::Separate, seed),
            ExperimentConfig::new(
                name,
                "adult",
                ModelFamily::Gbm,
                Strategy::PositiveDiscrimination,
                seed,
            ),
            ExperimentConfig::new(
                name,
                "adult",
                ModelFamily::Logistic,
                Strategy::PositiveDiscrimination,
                seed,
            ),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (valid presets: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(configs)
}
