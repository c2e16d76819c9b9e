//! Resolved run configuration: flags over config file over defaults.
//!
//! The config file is flat `key = value` TOML using the same names as the
//! long flags with underscores, for example
//!
//! ```text
//! data_dir = "data/nse"
//! activation = "leakyrelu"
//! epochs = 50
//! ridge_alpha = 0.5
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use confuse_core::data::{NormScheme, PrepareConfig};
use confuse_core::downstream::ForestConfig;
use confuse_core::{Activation, Dims, TrainConfig};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CONFUSE_OUT_DIR";
pub const RESOLVED_CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaeScale {
    /// On the normalized values the model sees.
    #[default]
    Normalized,
    /// After inverting the normalization.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// A CSV file or a directory of CSV files, one stock each.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Where trained models are read from; `out_dir` when unset.
    pub model_dir: Option<PathBuf>,

    pub activation: String,
    pub prelu_slope: f64,
    pub leaky_slope: f64,
    pub window_len: usize,
    pub stride: usize,
    pub filters: usize,
    pub filter_len: usize,
    pub fused: usize,
    pub norm: NormScheme,
    pub train_fraction: f64,

    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub weight_decay: f64,
    pub mu: f64,
    pub lambda: f64,
    pub seed: u64,
    pub train_slope: bool,

    pub ridge_alpha: f64,
    pub mae_scale: MaeScale,
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; 0 means `⌈√F⌉`.
    pub features_per_split: usize,
    pub bootstrap: bool,
    /// BUY when the forest probability is at least this.
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let dims = Dims::default();
        let prep = PrepareConfig::default();
        let forest = ForestConfig::default();
        RunConfig {
            data_dir: None,
            out_dir: std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("confuse-out")),
            model_dir: None,
            activation: "selu".into(),
            prelu_slope: 0.25,
            leaky_slope: 0.01,
            window_len: prep.window_len,
            stride: prep.stride,
            filters: dims.filters,
            filter_len: dims.filter_len,
            fused: dims.fused,
            norm: prep.scheme,
            train_fraction: prep.train_fraction,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.lr,
            beta1: train.beta1,
            beta2: train.beta2,
            eps_adam: train.eps_adam,
            weight_decay: train.weight_decay,
            mu: train.mu,
            lambda: train.lambda,
            seed: train.seed,
            train_slope: train.train_slope,
            ridge_alpha: 1.0,
            mae_scale: MaeScale::Normalized,
            num_trees: forest.num_trees,
            max_depth: forest.max_depth,
            min_leaf: forest.min_leaf,
            features_per_split: 0,
            bootstrap: forest.bootstrap,
            threshold: 0.5,
        }
    }
}

/// Command-line overrides; every field mirrors a [`RunConfig`] key.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    /// CSV file or directory of per-stock CSV files
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Output directory [default: $CONFUSE_OUT_DIR or ./confuse-out]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Directory holding trained models [default: out_dir]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_dir: Option<PathBuf>,
    /// selu, relu, prelu, leakyrelu, tanh, sigmoid or identity
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    /// Initial PReLU slope
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prelu_slope: Option<f64>,
    /// Fixed LeakyReLU slope
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaky_slope: Option<f64>,
    /// Window length L in trading days
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_len: Option<usize>,
    /// Days between consecutive window anchors
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Filters per channel M
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filters: Option<usize>,
    /// Filter length P
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_len: Option<usize>,
    /// Fused code length F
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fused: Option<usize>,
    /// minmax or zscore
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormScheme>,
    /// Fraction of windows in the training split
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_adam: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    /// Frobenius penalty weight
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Log-determinant weight
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Master seed; per-stock seeds derive from it
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Train the PReLU slope
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_slope: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge_alpha: Option<f64>,
    /// Scale on which forecast MAE is reported
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_scale: Option<MaeScale>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_trees: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_leaf: Option<usize>,
    /// Candidate features per split, 0 for ⌈√F⌉
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features_per_split: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    /// BUY probability threshold
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

fn to_table<T: Serialize>(v: &T) -> Result<toml::Table, CliError> {
    match toml::Value::try_from(v) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err(CliError::Config("configuration is not a table".into())),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

impl RunConfig {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
        let mut table = to_table(&RunConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let from_file: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            table.extend(from_file);
        }
        table.extend(to_table(overrides)?);
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.activation()?;
        self.dims().validate()?;
        self.train_config(self.seed).validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        if !(self.ridge_alpha > 0.0 && self.ridge_alpha.is_finite()) {
            return Err(CliError::Config(format!("ridge_alpha must be positive, got {}", self.ridge_alpha)));
        }
        if self.num_trees == 0 || self.min_leaf == 0 {
            return Err(CliError::Config("num_trees and min_leaf must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }

    pub fn activation(&self) -> Result<Activation, CliError> {
        let act: Activation = self.activation.parse()?;
        let act = match act {
            Activation::Prelu { .. } => act.with_slope(self.prelu_slope),
            Activation::LeakyRelu { .. } => act.with_slope(self.leaky_slope),
            other => other,
        };
        act.validate()?;
        Ok(act)
    }

    pub fn dims(&self) -> Dims {
        Dims {
            channels: confuse_core::data::NUM_CHANNELS,
            window: self.window_len,
            filters: self.filters,
            filter_len: self.filter_len,
            fused: self.fused,
        }
    }

    pub fn prepare(&self) -> PrepareConfig {
        PrepareConfig {
            window_len: self.window_len,
            stride: self.stride,
            scheme: self.norm,
            train_fraction: self.train_fraction,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            weight_decay: self.weight_decay,
            mu: self.mu,
            lambda: self.lambda,
            seed,
            train_slope: self.train_slope,
        }
    }

    pub fn forest(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            num_trees: self.num_trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: (self.features_per_split > 0).then_some(self.features_per_split),
            bootstrap: self.bootstrap,
            seed,
        }
    }

    pub fn model_dir(&self) -> &Path {
        self.model_dir.as_deref().unwrap_or(&self.out_dir)
    }

    pub fn data_dir(&self) -> Result<&Path, CliError> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("data_dir is required (flag --data-dir or config key)".into()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Writes the resolved configuration into the output directory.
    pub fn persist(&self) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.out_dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.to_toml()?).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
