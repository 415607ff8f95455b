use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::encode::{encode, EncodeSpec, EncodedDataset, ValueRef};
use super::preprocess::{adult_recipe, apply_preprocess, PreprocessSpec};
use super::table::{load_csv_files, ColumnData, CsvSchema, RawTable};
use crate::error::{Error, Result};

/// Environment variable naming a directory searched for `<name>.toml` / `<name>.json` configs.
pub const CONFIG_DIR_ENV: &str = "FAIRAUDIT_CONFIG_DIR";
/// Environment variable naming the directory relative data file paths resolve against.
pub const DATA_DIR_ENV: &str = "FAIRAUDIT_DATA_DIR";

const BUILTINS: &[(&str, &str)] = &[
    ("adult", include_str!("../../../../configs/adult.toml")),
    ("adult-ethnic", include_str!("../../../../configs/adult-ethnic.toml")),
    ("german", include_str!("../../../../configs/german.toml")),
    ("compas", include_str!("../../../../configs/compas.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// Everything needed to turn raw files into an [`EncodedDataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    /// Data files, concatenated in order. Relative paths resolve against the data directory.
    pub files: Vec<PathBuf>,
    #[serde(flatten)]
    pub csv: CsvSchema,
    /// Named built-in recipe applied before `preprocess` (currently only `"adult"`).
    #[serde(default)]
    pub recipe: Option<String>,
    #[serde(default)]
    pub preprocess: PreprocessSpec,
    pub label: ValueRef,
    pub sensitive: ValueRef,
    /// Column holding an existing decision rule's output, audited as predictions.
    #[serde(default)]
    pub prediction: Option<ValueRef>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("built-in configs parse"))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text)?,
            _ => Self::from_toml(&text)?,
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Looks `reference` up as a built-in name, then a file path, then a name
    /// inside `$FAIRAUDIT_CONFIG_DIR`.
    pub fn resolve(reference: &str) -> Result<Self> {
        if let Some(cfg) = Self::builtin(reference) {
            return Ok(cfg);
        }
        let path = Path::new(reference);
        if path.is_file() {
            return Self::from_file(path);
        }
        if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
            for ext in ["toml", "json"] {
                let candidate = Path::new(&dir).join(format!("{reference}.{ext}"));
                if candidate.is_file() {
                    return Self::from_file(&candidate);
                }
            }
        }
        Err(Error::Config(format!(
            "no dataset config '{reference}' (built-ins: {})",
            builtin_names().join(", ")
        )))
    }

    pub fn full_preprocess(&self) -> Result<PreprocessSpec> {
        let mut transforms = match self.recipe.as_deref() {
            None => Vec::new(),
            Some("adult") => adult_recipe().0,
            Some(other) => return Err(Error::Config(format!("unknown recipe '{other}'"))),
        };
        transforms.extend(self.preprocess.0.iter().cloned());
        Ok(PreprocessSpec(transforms))
    }

    /// Resolves data file paths. `data_dir` wins over `$FAIRAUDIT_DATA_DIR`,
    /// which wins over the config file's directory, then `./data`.
    pub fn file_paths(&self, data_dir: Option<&Path>) -> Vec<PathBuf> {
        let env_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let base = data_dir
            .map(Path::to_path_buf)
            .or(env_dir)
            .or_else(|| self.base_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data"));
        self.files
            .iter()
            .map(|f| if f.is_absolute() { f.clone() } else { base.join(f) })
            .collect()
    }

    pub fn encode_spec(&self) -> EncodeSpec {
        let mut exclude = self.exclude.clone();
        if let Some(p) = &self.prediction {
            exclude.push(p.column.clone());
        }
        EncodeSpec {
            label: self.label.clone(),
            sensitive: self.sensitive.clone(),
            exclude,
        }
    }

    /// Same config with a different sensitive attribute.
    pub fn with_sensitive(mut self, column: &str, protected: &str) -> Self {
        self.sensitive = ValueRef {
            column: column.into(),
            value: protected.into(),
        };
        self
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub config: DatasetConfig,
    pub table: RawTable,
    pub data: EncodedDataset,
    /// Decisions from the config's prediction column, aligned with `data`.
    pub predictions: Option<Vec<u8>>,
}

pub fn load_dataset(cfg: &DatasetConfig, data_dir: Option<&Path>) -> Result<LoadedDataset> {
    let raw = load_csv_files(&cfg.file_paths(data_dir), &cfg.csv)?;
    let table = apply_preprocess(&raw, &cfg.full_preprocess()?)?;
    let data = encode(&table, &cfg.encode_spec())?;
    let predictions = match &cfg.prediction {
        None => None,
        Some(p) => {
            let col = table
                .column(&p.column)
                .ok_or_else(|| Error::Config(format!("prediction column '{}' not found", p.column)))?;
            let ColumnData::Categorical(v) = &col.data else {
                return Err(Error::Config(format!(
                    "prediction column '{}' must be categorical",
                    p.column
                )));
            };
            Some(
                v.iter()
                    .map(|c| u8::from(c.as_deref() == Some(p.value.as_str())))
                    .collect(),
            )
        }
    };
    Ok(LoadedDataset {
        config: cfg.clone(),
        table,
        data,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in builtin_names() {
            let cfg = DatasetConfig::builtin(name).unwrap();
            assert_eq!(cfg.name, name);
            cfg.full_preprocess().unwrap();
        }
    }

    #[test]
    fn adult_builtin_uses_recipe() {
        let cfg = DatasetConfig::builtin("adult").unwrap();
        assert_eq!(cfg.recipe.as_deref(), Some("adult"));
        assert_eq!(cfg.csv.columns.len(), 15);
        assert_eq!(cfg.sensitive.value, "Female");
    }

    #[test]
    fn unknown_reference() {
        assert!(matches!(
            DatasetConfig::resolve("no-such-config"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let cfg = DatasetConfig::builtin("german").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(DatasetConfig::from_json(&text).unwrap(), cfg);
    }
}
