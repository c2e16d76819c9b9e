//! Convolutional transform learning with multi-channel fusion for daily stock
//! series, plus ridge forecasting and random-forest trading on the learned
//! codes.

pub mod activations;
pub mod ctl;
pub mod data;
pub mod downstream;
pub mod error;
pub mod linalg;
pub mod model;
pub mod selfcheck;

pub use activations::Activation;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{ConFuseModel, Dims, TrainConfig};
