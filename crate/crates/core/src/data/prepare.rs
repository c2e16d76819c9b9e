use serde::{Deserialize, Serialize};

use super::{split_temporal, window, MultiChannelSeries, NormParams, NormScheme, WindowedSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub window_len: usize,
    pub stride: usize,
    pub scheme: NormScheme,
    pub train_fraction: f64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            window_len: 20,
            stride: 1,
            scheme: NormScheme::MinMax,
            train_fraction: 0.8,
        }
    }
}

/// Normalized, split samples for one symbol.
#[derive(Debug, Clone)]
pub struct PreparedStock {
    pub symbol: String,
    pub norm: NormParams,
    pub train: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
}

/// Windows on raw values, splits chronologically, then fits normalization on
/// the days up to the last training anchor only.
pub fn prepare_stock(series: &MultiChannelSeries, cfg: &PrepareConfig) -> Result<PreparedStock> {
    prepare(series, cfg, None)
}

/// Same split as [`prepare_stock`] but with previously fitted parameters.
pub fn prepare_stock_with_norm(
    series: &MultiChannelSeries,
    cfg: &PrepareConfig,
    norm: NormParams,
) -> Result<PreparedStock> {
    prepare(series, cfg, Some(norm))
}

fn prepare(series: &MultiChannelSeries, cfg: &PrepareConfig, norm: Option<NormParams>) -> Result<PreparedStock> {
    let samples = window(series, cfg.window_len, cfg.stride)?;
    let (mut train, mut test) = split_temporal(samples, cfg.train_fraction)?;
    let norm = match norm {
        Some(n) => n,
        None => {
            let last_anchor = train.last().expect("split leaves a non-empty train side").anchor_date;
            let idx = series
                .dates
                .iter()
                .position(|d| *d == last_anchor)
                .ok_or_else(|| Error::Data("anchor date missing from series".into()))?;
            NormParams::fit(series, cfg.scheme, 0..idx + 1)?
        }
    };
    for s in train.iter_mut().chain(test.iter_mut()) {
        norm.apply_sample(s);
    }
    Ok(PreparedStock {
        symbol: series.symbol.clone(),
        norm,
        train,
        test,
    })
}
