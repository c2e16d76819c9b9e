//! Seeded synthetic OHLC+NAV series for tests, fixtures and dry runs.
//!
//! A latent AR(1) factor drives the close; open tracks the previous close,
//! high and low bracket the day, and NAV follows the close on a larger scale.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{write_stock_csv, MultiChannelSeries};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    /// AR(1) coefficient of the latent factor.
    pub persistence: f64,
    pub level: f64,
    /// Close moves `factor_scale` per unit of the latent factor.
    pub factor_scale: f64,
    pub nav_multiplier: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            persistence: 0.3,
            level: 100.0,
            factor_scale: 4.0,
            nav_multiplier: 10.0,
        }
    }
}

/// Weekdays starting 2014-01-01.
pub fn trading_days(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

pub fn synthetic_series(symbol: &str, days: usize, seed: u64) -> MultiChannelSeries {
    synthetic_series_with(symbol, days, seed, SyntheticSpec::default())
}

pub fn synthetic_series_with(symbol: &str, days: usize, seed: u64, spec: SyntheticSpec) -> MultiChannelSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let mut series = MultiChannelSeries {
        symbol: symbol.to_string(),
        dates: trading_days(days),
        channels: Default::default(),
    };
    let mut factor = 0.0;
    let mut prev_close = spec.level;
    for _ in 0..days {
        factor = spec.persistence * factor + normal();
        let close = spec.level + spec.factor_scale * factor;
        let open = prev_close + 0.5 * normal();
        let high = open.max(close) + 0.5 * normal().abs();
        let low = open.min(close) - 0.5 * normal().abs();
        let nav = spec.nav_multiplier * close + 2.0 * normal();
        for (ch, v) in series.channels.iter_mut().zip([open, close, high, low, nav]) {
            ch.push(v);
        }
        prev_close = close;
    }
    series
}

/// Writes `count` synthetic stocks as `SYN<i>.csv` under `dir`, seeds derived
/// from `seed`. Returns the file paths.
pub fn write_synthetic_dir(dir: &Path, count: usize, days: usize, seed: u64) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    (0..count)
        .map(|i| {
            let symbol = format!("SYN{i}");
            let path = dir.join(format!("{symbol}.csv"));
            let s = synthetic_series(&symbol, days, seed.wrapping_mul(1000).wrapping_add(i as u64));
            write_stock_csv(&path, &s)?;
            Ok(path)
        })
        .collect()
}
