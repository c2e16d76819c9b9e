use super::{Channel, Label, MultiChannelSeries, WindowedSample};
use crate::error::{Error, Result};

/// One sample per anchor `t ∈ {L-1, L-1+stride, …} ∩ [L-1, n-2]`.
///
/// Windows cover days `[t-L+1, t]`, the target is day `t+1`, and the label
/// is BUY exactly when the next close is strictly above the anchor close.
pub fn window(series: &MultiChannelSeries, len: usize, stride: usize) -> Result<Vec<WindowedSample>> {
    if len == 0 || stride == 0 {
        return Err(Error::Config("window length and stride must be positive".into()));
    }
    let n = series.len();
    if n < len + 1 {
        return Err(Error::Data(format!(
            "{}: series of {n} days is too short for windows of {len} plus a target day",
            series.symbol
        )));
    }
    let close = series.channel(Channel::Close);
    let samples = (len - 1..=n - 2)
        .step_by(stride)
        .map(|t| WindowedSample {
            windows: series
                .channels
                .iter()
                .map(|ch| ch[t + 1 - len..=t].to_vec())
                .collect(),
            target: series.day(t + 1),
            label: if close[t + 1] > close[t] {
                Label::Buy
            } else {
                Label::Sell
            },
            anchor_date: series.dates[t],
            target_date: series.dates[t + 1],
        })
        .collect();
    Ok(samples)
}

/// Chronological split; the first `round(train_fraction · n)` samples train.
pub fn split_temporal(
    mut samples: Vec<WindowedSample>,
    train_fraction: f64,
) -> Result<(Vec<WindowedSample>, Vec<WindowedSample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if samples.windows(2).any(|w| w[0].anchor_date >= w[1].anchor_date) {
        return Err(Error::Data("samples are not in anchor-date order".into()));
    }
    let n_train = (train_fraction * samples.len() as f64).round() as usize;
    if n_train == 0 || n_train >= samples.len() {
        return Err(Error::Data(format!(
            "split of {} samples at {train_fraction} leaves one side empty",
            samples.len()
        )));
    }
    let test = samples.split_off(n_train);
    Ok((samples, test))
}
