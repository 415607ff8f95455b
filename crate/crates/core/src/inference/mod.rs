//! Confidence intervals and tests for disparate impact and rate ratios.

mod bootstrap;
mod delta;
mod normal;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapEstimate, MAX_UNDEFINED_FRACTION, MIN_REPLICATES};
pub use delta::{
    confidence_interval, di_confidence_interval, di_sigma, indicator_covariance,
    rate_ratio_confidence_interval, rate_ratio_sigma, ratio_confidence_interval, ratio_gradient,
    ratio_sigma, CIEstimate, CIMethod, DiTarget,
};
pub use normal::{normal_cdf, normal_quantile};
pub use test::{di_level_test, Direction, TestResult};
