//! Evaluation and reporting: ranking and threshold metrics, survey-weighted
//! aggregation with a global linear rescaling, trend smoothing, robust OLS
//! and per-group AUC tables.

mod aggregate;
mod groups;
mod metrics;
mod ols;
mod smooth;

pub use aggregate::{
    fit_rescaling, interval_cover_rate, margin_correct_rate, rescale_cells, weighted_aggregate, AggregatedCell,
    CalibrationLine, Scored, MARGIN_TOLERANCE,
};
pub use groups::{
    individual_auc, opinion_auc, opinion_covariates, zscore_columns, GroupAuc, GroupAucTable, OpinionCovariates,
};
pub use metrics::{accuracy_f1, auc, correlation, Classification};
pub use ols::{ols_robust, RegressionResult};
pub use smooth::{smooth_trend, SmoothedPoint, TrendPoint};
