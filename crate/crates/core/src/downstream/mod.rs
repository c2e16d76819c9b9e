//! Forecasting and trading on learned codes.

mod forest;
mod metrics;
mod ridge;

pub use forest::{forest_fit, forest_predict_proba, ForestConfig, ForestModel, Node};
pub use metrics::{
    annualized_return, auc_midrank, classification_metrics, relative_difference, ClassificationMetrics, EvalReport,
    TRADING_DAYS_PER_YEAR,
};
pub use ridge::{mae, ridge_fit, ridge_predict, RidgeModel};
