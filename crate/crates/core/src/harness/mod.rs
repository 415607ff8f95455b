//! Cross-validated experiments and the figure presets built on them.

mod config;
mod report;
mod run;

pub use config::{preset, ExperimentConfig, PRESETS};
pub use report::{
    aggregate, summarize, write_csv, BaselineRecord, ExperimentReport, FailedExperiment,
    FoldRecord, Reference, Summary, SummaryRow, SuiteReport, CSV_HEADER, REPORT_SCHEMA_VERSION,
};
pub use run::{
    derive_seed, run_cross_validation, run_cross_validation_on, run_suite, FoldObserver,
    PreparedData,
};
