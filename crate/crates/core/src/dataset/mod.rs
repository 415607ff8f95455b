//! Loading, cleaning, encoding and splitting tabular data.

mod config;
mod encode;
mod preprocess;
mod split;
mod table;

pub use config::{
    builtin_names, load_dataset, DatasetConfig, LoadedDataset, CONFIG_DIR_ENV, DATA_DIR_ENV,
};
pub use encode::{
    encode, EncodeSpec, EncodedDataset, FeatureInfo, FeatureKind, Matrix, ValueRef,
};
pub use preprocess::{
    adult_recipe, apply_preprocess, Predicate, PreprocessSpec, Transform,
    ADULT_CHILD_RELATIONSHIPS,
};
pub use split::{balance_groups, balanced_subsample, kfold, FoldPlan};
pub use table::{
    load_csv, load_csv_files, Column, ColumnData, ColumnKind, ColumnSpec, CsvSchema, RawTable,
};
