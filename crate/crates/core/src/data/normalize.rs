use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MultiChannelSeries, WindowedSample, NUM_CHANNELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormScheme {
    /// Per-channel affine map of the fit segment onto `[0, 1]`.
    #[default]
    MinMax,
    /// Per-channel zero mean, unit (population) standard deviation.
    ZScore,
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormScheme::MinMax => "minmax",
            NormScheme::ZScore => "zscore",
        })
    }
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minmax" => Ok(NormScheme::MinMax),
            "zscore" => Ok(NormScheme::ZScore),
            other => Err(Error::Config(format!("unknown normalization scheme '{other}'"))),
        }
    }
}

/// `normalized = (raw - offset) / scale`, per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub scheme: NormScheme,
    pub offset: [f64; NUM_CHANNELS],
    pub scale: [f64; NUM_CHANNELS],
}

impl NormParams {
    /// Fits on the days in `fit`; nothing outside that range is read.
    pub fn fit(series: &MultiChannelSeries, scheme: NormScheme, fit: Range<usize>) -> Result<Self> {
        if fit.is_empty() || fit.end > series.len() {
            return Err(Error::Data(format!(
                "fit range {fit:?} invalid for series of length {}",
                series.len()
            )));
        }
        let mut offset = [0.0; NUM_CHANNELS];
        let mut scale = [1.0; NUM_CHANNELS];
        for c in 0..NUM_CHANNELS {
            let seg = &series.channels[c][fit.clone()];
            let (o, s) = match scheme {
                NormScheme::MinMax => {
                    let lo = seg.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                NormScheme::ZScore => {
                    let n = seg.len() as f64;
                    let mean = seg.iter().sum::<f64>() / n;
                    let var = seg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    (mean, var.sqrt())
                }
            };
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Data(format!(
                    "{}: channel {} is degenerate on the fit segment",
                    series.symbol,
                    super::Channel::ALL[c].name()
                )));
            }
            offset[c] = o;
            scale[c] = s;
        }
        Ok(NormParams {
            scheme,
            offset,
            scale,
        })
    }

    #[inline]
    pub fn forward(&self, c: usize, x: f64) -> f64 {
        (x - self.offset[c]) / self.scale[c]
    }

    #[inline]
    pub fn inverse(&self, c: usize, x: f64) -> f64 {
        x * self.scale[c] + self.offset[c]
    }

    pub fn apply_series(&self, series: &MultiChannelSeries) -> MultiChannelSeries {
        let mut out = series.clone();
        for (c, ch) in out.channels.iter_mut().enumerate() {
            for v in ch.iter_mut() {
                *v = self.forward(c, *v);
            }
        }
        out
    }

    pub fn invert_series(&self, series: &MultiChannelSeries) -> MultiChannelSeries {
        let mut out = series.clone();
        for (c, ch) in out.channels.iter_mut().enumerate() {
            for v in ch.iter_mut() {
                *v = self.inverse(c, *v);
            }
        }
        out
    }

    /// Normalizes windows and targets; the label is left as computed on raw values.
    pub fn apply_sample(&self, sample: &mut WindowedSample) {
        for (c, w) in sample.windows.iter_mut().enumerate() {
            for v in w.iter_mut() {
                *v = self.forward(c, *v);
            }
        }
        for (c, v) in sample.target.iter_mut().enumerate() {
            *v = self.forward(c, *v);
        }
    }

    pub fn invert_row(&self, row: &[f64; NUM_CHANNELS]) -> [f64; NUM_CHANNELS] {
        std::array::from_fn(|c| self.inverse(c, row[c]))
    }
}

/// Fits `scheme` on the first `fit_len` days and applies it to the whole series.
pub fn normalize(
    series: &MultiChannelSeries,
    scheme: NormScheme,
    fit_len: usize,
) -> Result<(MultiChannelSeries, NormParams)> {
    let params = NormParams::fit(series, scheme, 0..fit_len)?;
    Ok((params.apply_series(series), params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::synthetic_series;
    use crate::data::Channel;

    #[test]
    fn minmax_step_channel_maps_to_unit() {
        let mut s = synthetic_series("S", 10, 1);
        s.channels[Channel::Close.index()] = vec![5.0, 5.0, 5.0, 5.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        let (n, _) = normalize(&s, NormScheme::MinMax, 10).unwrap();
        for &v in n.channel(Channel::Close) {
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn zscore_moments_on_fit_segment() {
        let s = synthetic_series("S", 200, 2);
        let (n, _) = normalize(&s, NormScheme::ZScore, 150).unwrap();
        for c in 0..NUM_CHANNELS {
            let seg = &n.channels[c][..150];
            let mean = seg.iter().sum::<f64>() / 150.0;
            let std = (seg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 150.0).sqrt();
            assert!(mean.abs() <= 1e-12, "{mean}");
            assert!((std - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn round_trip_inversion() {
        for scheme in [NormScheme::MinMax, NormScheme::ZScore] {
            let s = synthetic_series("S", 120, 3);
            let (n, p) = normalize(&s, scheme, 80).unwrap();
            let back = p.invert_series(&n);
            for c in 0..NUM_CHANNELS {
                for (a, b) in back.channels[c].iter().zip(&s.channels[c]) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn degenerate_channel_rejected() {
        let mut s = synthetic_series("S", 10, 1);
        s.channels[Channel::Nav.index()] = vec![3.0; 10];
        assert!(normalize(&s, NormScheme::MinMax, 10).is_err());
        assert!(normalize(&s, NormScheme::ZScore, 10).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("MinMax".parse::<NormScheme>().unwrap(), NormScheme::MinMax);
        assert_eq!("zscore".parse::<NormScheme>().unwrap(), NormScheme::ZScore);
        assert!("robust".parse::<NormScheme>().is_err());
    }
}
