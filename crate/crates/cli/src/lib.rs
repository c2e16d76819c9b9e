//! Pipeline behind the `confuse` binary: per-stock training, forecasting,
//! trading evaluation, feature export and self-checks.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{MaeScale, Overrides, RunConfig};
pub use error::{exit, CliError};
pub use pipeline::{cmd_features, cmd_forecast, cmd_selfcheck, cmd_trade, cmd_train, stock_seed, Summary};
