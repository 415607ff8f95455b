use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    /// A preprocessing transform could not be applied; `index` is its position in the spec.
    #[error("preprocess transform #{index} ({op}): {message}")]
    Transform {
        index: usize,
        op: &'static str,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{metric} is undefined: {cell}")]
    UndefinedMetric { metric: &'static str, cell: String },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("bootstrap unstable: {undefined} of {replicates} replicates undefined")]
    Instability { undefined: usize, replicates: usize },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn undefined(metric: &'static str, cell: impl Into<String>) -> Self {
        Error::UndefinedMetric {
            metric,
            cell: cell.into(),
        }
    }

    /// Stable snake_case name of the variant, used in reports and for exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Transform { .. } => "transform",
            Error::Argument(_) => "argument",
            Error::UndefinedMetric { .. } => "undefined_metric",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::DegenerateTraining(_) => "degenerate_training",
            Error::Instability { .. } => "instability",
            Error::Serialization(_) => "serialization",
        }
    }

    /// Wraps an error with the cross-validation fold it came from, keeping its category.
    pub fn in_fold(self, fold: usize) -> Self {
        match self {
            Error::DegenerateTraining(m) => Error::DegenerateTraining(format!("fold {fold}: {m}")),
            Error::UndefinedMetric { metric, cell } => Error::UndefinedMetric {
                metric,
                cell: format!("fold {fold}: {cell}"),
            },
            Error::DegenerateVariance(m) => Error::DegenerateVariance(format!("fold {fold}: {m}")),
            Error::Argument(m) => Error::Argument(format!("fold {fold}: {m}")),
            other => other,
        }
    }
}
