use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::{Column, ColumnData, RawTable};
use crate::error::{Error, Result};

/// Condition tested against a single cell when deriving a binary column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Categorical value is one of these.
    In(Vec<String>),
    /// Continuous value is `>=` the bound.
    AtLeast(f64),
    /// Continuous value is `<` the bound.
    Below(f64),
}

fn yes() -> String {
    "yes".into()
}

fn no() -> String {
    "no".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    DropColumn {
        name: String,
    },
    DropRowsWithMissing,
    MergeCategories {
        column: String,
        mapping: BTreeMap<String, String>,
    },
    /// Replaces `column` by a two-valued column named `new_name`.
    Binarize {
        column: String,
        positive_values: Vec<String>,
        new_name: String,
        #[serde(default = "yes")]
        positive_label: String,
        #[serde(default = "no")]
        negative_label: String,
    },
    /// Appends a two-valued column computed from `source_column`.
    DeriveBinary {
        new_name: String,
        source_column: String,
        predicate: Predicate,
        #[serde(default = "yes")]
        positive_label: String,
        #[serde(default = "no")]
        negative_label: String,
    },
    NormalizeLabel {
        column: String,
        mapping: BTreeMap<String, String>,
    },
}

impl Transform {
    pub fn op_name(&self) -> &'static str {
        match self {
            Transform::DropColumn { .. } => "drop_column",
            Transform::DropRowsWithMissing => "drop_rows_with_missing",
            Transform::MergeCategories { .. } => "merge_categories",
            Transform::Binarize { .. } => "binarize",
            Transform::DeriveBinary { .. } => "derive_binary",
            Transform::NormalizeLabel { .. } => "normalize_label",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreprocessSpec(pub Vec<Transform>);

impl PreprocessSpec {
    pub fn transforms(&self) -> &[Transform] {
        &self.0
    }
}

/// Relationship values that count as having a child in the built-in Adult recipe.
pub const ADULT_CHILD_RELATIONSHIPS: &[&str] = &["Own-child"];

/// The fixed Adult Income cleanup recipe.
pub fn adult_recipe() -> PreprocessSpec {
    let label_mapping = [
        ("<50K", "<=50K"),
        ("<50K.", "<=50K"),
        ("<=50K.", "<=50K"),
        ("≤50K", "<=50K"),
        (">=50K", ">50K"),
        (">=50K.", ">50K"),
        (">50K.", ">50K"),
        ("≥50K", ">50K"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();

    PreprocessSpec(vec![
        Transform::DropRowsWithMissing,
        Transform::DropColumn {
            name: "fnlwgt".into(),
        },
        Transform::DeriveBinary {
            new_name: "child".into(),
            source_column: "relationship".into(),
            predicate: Predicate::In(
                ADULT_CHILD_RELATIONSHIPS.iter().map(|s| s.to_string()).collect(),
            ),
            positive_label: "ChildYes".into(),
            negative_label: "ChildNo".into(),
        },
        Transform::DropColumn {
            name: "relationship".into(),
        },
        Transform::DropColumn {
            name: "nativCountry".into(),
        },
        Transform::Binarize {
            column: "origEthn".into(),
            positive_values: vec!["White".into()],
            new_name: "origEthn".into(),
            positive_label: "CaucYes".into(),
            negative_label: "CaucNo".into(),
        },
        Transform::DropColumn {
            name: "education".into(),
        },
        Transform::NormalizeLabel {
            column: "income".into(),
            mapping: label_mapping,
        },
    ])
}

/// Applies the transforms of `spec` in order.
pub fn apply_preprocess(table: &RawTable, spec: &PreprocessSpec) -> Result<RawTable> {
    let mut table = table.clone();
    for (index, t) in spec.transforms().iter().enumerate() {
        let err = |message: String| Error::Transform {
            index,
            op: t.op_name(),
            message,
        };
        let locate = |table: &RawTable, name: &str| {
            table
                .position(name)
                .ok_or_else(|| err(format!("column '{name}' does not exist")))
        };
        match t {
            Transform::DropColumn { name } => {
                let pos = locate(&table, name)?;
                table.columns_mut().remove(pos);
                if table.n_columns() == 0 {
                    return Err(err("cannot drop the last column".into()));
                }
            }
            Transform::DropRowsWithMissing => {
                let keep: Vec<usize> = (0..table.n_rows())
                    .filter(|&r| !table.columns().iter().any(|c| c.data.is_missing(r)))
                    .collect();
                if keep.len() != table.n_rows() {
                    table = table.select_rows(&keep);
                }
            }
            Transform::MergeCategories { column, mapping }
            | Transform::NormalizeLabel { column, mapping } => {
                let pos = locate(&table, column)?;
                let ColumnData::Categorical(values) = &mut table.columns_mut()[pos].data else {
                    return Err(err(format!("column '{column}' is not categorical")));
                };
                for v in values.iter_mut().flatten() {
                    if let Some(new) = mapping.get(v.as_str()) {
                        v.clone_from(new);
                    }
                }
            }
            Transform::Binarize {
                column,
                positive_values,
                new_name,
                positive_label,
                negative_label,
            } => {
                let pos = locate(&table, column)?;
                if new_name != column && table.position(new_name).is_some() {
                    return Err(err(format!("column '{new_name}' already exists")));
                }
                let col = &table.columns()[pos];
                let ColumnData::Categorical(values) = &col.data else {
                    return Err(err(format!("column '{column}' is not categorical")));
                };
                let mapped = values
                    .iter()
                    .map(|v| {
                        v.as_ref().map(|v| {
                            if positive_values.contains(v) {
                                positive_label.clone()
                            } else {
                                negative_label.clone()
                            }
                        })
                    })
                    .collect();
                table.columns_mut()[pos] = Column::categorical(new_name.clone(), mapped);
            }
            Transform::DeriveBinary {
                new_name,
                source_column,
                predicate,
                positive_label,
                negative_label,
            } => {
                let pos = locate(&table, source_column)?;
                if table.position(new_name).is_some() {
                    return Err(err(format!("column '{new_name}' already exists")));
                }
                let label = |hit: bool| {
                    if hit {
                        positive_label.clone()
                    } else {
                        negative_label.clone()
                    }
                };
                let derived: Vec<Option<String>> = match (&table.columns()[pos].data, predicate) {
                    (ColumnData::Categorical(v), Predicate::In(set)) => v
                        .iter()
                        .map(|c| c.as_ref().map(|c| label(set.contains(c))))
                        .collect(),
                    (ColumnData::Continuous(v), Predicate::AtLeast(b)) => {
                        v.iter().map(|x| x.map(|x| label(x >= *b))).collect()
                    }
                    (ColumnData::Continuous(v), Predicate::Below(b)) => {
                        v.iter().map(|x| x.map(|x| label(x < *b))).collect()
                    }
                    _ => {
                        return Err(err(format!(
                            "predicate does not apply to the kind of column '{source_column}'"
                        )))
                    }
                };
                table
                    .columns_mut()
                    .push(Column::categorical(new_name.clone(), derived));
            }
        }
    }
    Ok(table)
}
