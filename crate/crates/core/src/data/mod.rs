//! Stock series ingestion, normalization, windowing and temporal splits.

mod csv_io;
mod normalize;
mod prepare;
pub mod synthetic;
mod window;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use csv_io::{load_stock_csv, write_stock_csv, DroppedRow, IngestReport};
pub use normalize::{normalize, NormParams, NormScheme};
pub use prepare::{prepare_stock, prepare_stock_with_norm, PrepareConfig, PreparedStock};
pub use window::{split_temporal, window};

pub const NUM_CHANNELS: usize = 5;

/// Column order used everywhere: inputs, targets and files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Open = 0,
    Close = 1,
    High = 2,
    Low = 3,
    Nav = 4,
}

impl Channel {
    pub const ALL: [Channel; NUM_CHANNELS] = [
        Channel::Open,
        Channel::Close,
        Channel::High,
        Channel::Low,
        Channel::Nav,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Open => "open",
            Channel::Close => "close",
            Channel::High => "high",
            Channel::Low => "low",
            Channel::Nav => "nav",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Aligned daily series for one symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiChannelSeries {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    /// `channels[c][t]`, indexed by [`Channel`].
    pub channels: [Vec<f64>; NUM_CHANNELS],
}

impl MultiChannelSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c.index()]
    }

    pub fn day(&self, t: usize) -> [f64; NUM_CHANNELS] {
        std::array::from_fn(|c| self.channels[c][t])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Buy,
    Sell,
}

impl Label {
    pub fn is_buy(self) -> bool {
        self == Label::Buy
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Buy => "BUY",
            Label::Sell => "SELL",
        }
    }
}

/// One training instance anchored at day `t`: windows over `[t-L+1, t]`,
/// targets from day `t+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    /// One window of length `L` per channel.
    pub windows: Vec<Vec<f64>>,
    /// Next-day open, close, high, low, nav.
    pub target: [f64; NUM_CHANNELS],
    pub label: Label,
    pub anchor_date: NaiveDate,
    pub target_date: NaiveDate,
}

impl WindowedSample {
    /// Last value of a channel window, i.e. the anchor day's value.
    pub fn last(&self, c: Channel) -> f64 {
        *self.windows[c.index()].last().expect("windows are non-empty")
    }
}
