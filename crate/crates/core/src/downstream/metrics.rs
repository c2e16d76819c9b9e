use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
}

/// Precision/recall/F1 with BUY as the positive class (`p >= threshold`
/// predicts BUY) and ROC AUC from the rank statistic. Empty denominators give 0.
pub fn classification_metrics(probs: &[f64], labels: &[bool], threshold: f64) -> Result<ClassificationMetrics> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::dim(format!(
            "{} scores for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationMetrics {
        precision,
        recall,
        f1,
        auc: auc_midrank(probs, labels),
    })
}

/// Mann–Whitney AUC with midranks for ties. `None` for a single class.
pub fn auc_midrank(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || scores.len() != labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of positive ranks, doubled so midranks stay integral
    let mut rank_sum_x2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share (i+1 + j+1)/2
        let mid_x2 = (i + 1 + j + 1) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        rank_sum_x2 += mid_x2 * pos_in_group;
        i = j + 1;
    }
    let np = n_pos as u64;
    let u_x2 = rank_sum_x2 - np * (np + 1);
    Some(0.5 * u_x2 as f64 / (n_pos as f64 * n_neg as f64))
}

/// Long-or-flat next-day strategy: on a BUY at day `t` the position earns
/// `close[t+1] / close[t]`; SELL stays flat. The last decision has no next
/// day and is not used. Returns `(G^(252/n) − 1)·100` with `n` the sequence
/// length.
pub fn annualized_return(buy: &[bool], closes: &[f64]) -> Result<f64> {
    if buy.len() != closes.len() || closes.len() < 2 {
        return Err(Error::dim(format!(
            "annualized return needs aligned sequences of length >= 2 (got {} decisions, {} closes)",
            buy.len(),
            closes.len()
        )));
    }
    if let Some(c) = closes.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Data(format!("close prices must be positive, found {c}")));
    }
    let log_growth: f64 = (0..closes.len() - 1)
        .filter(|&t| buy[t])
        .map(|t| (closes[t + 1] / closes[t]).ln())
        .sum();
    let n = closes.len() as f64;
    Ok(((TRADING_DAYS_PER_YEAR / n) * log_growth).exp_m1() * 100.0)
}

/// Forecasting and trading scores for one stock, or an average over stocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    /// MAE for open, close, high, low, nav.
    pub mae: Option<[f64; 5]>,
    /// Persistence-forecast MAE on the same samples.
    pub mae_persistence: Option<[f64; 5]>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub ar_predicted: Option<f64>,
    pub ar_actual: Option<f64>,
    /// `(ar_predicted − ar_actual) / |ar_actual|`; `None` when `ar_actual = 0`.
    pub ar_relative_diff: Option<f64>,
}

impl EvalReport {
    /// `key = value` lines; absent metrics are written as `nan`.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Option<f64>| {
            out.push_str(&format!("{k} = {}\n", v.map_or("nan".to_string(), |x| x.to_string())));
        };
        let names = ["open", "close", "high", "low", "nav"];
        for (i, n) in names.iter().enumerate() {
            put(&format!("mae_{n}"), self.mae.map(|m| m[i]));
        }
        for (i, n) in names.iter().enumerate() {
            put(&format!("mae_persistence_{n}"), self.mae_persistence.map(|m| m[i]));
        }
        put("precision", self.precision);
        put("recall", self.recall);
        put("f1", self.f1);
        put("auc", self.auc);
        put("ar_predicted", self.ar_predicted);
        put("ar_actual", self.ar_actual);
        put("ar_relative_diff", self.ar_relative_diff);
        out
    }

    /// Field-wise mean over reports, skipping absent values.
    pub fn average(reports: &[EvalReport]) -> EvalReport {
        fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
            let v: Vec<f64> = vals.flatten().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        }
        fn mean5(vals: Vec<Option<[f64; 5]>>) -> Option<[f64; 5]> {
            let v: Vec<[f64; 5]> = vals.into_iter().flatten().collect();
            (!v.is_empty()).then(|| std::array::from_fn(|i| v.iter().map(|a| a[i]).sum::<f64>() / v.len() as f64))
        }
        EvalReport {
            mae: mean5(reports.iter().map(|r| r.mae).collect()),
            mae_persistence: mean5(reports.iter().map(|r| r.mae_persistence).collect()),
            precision: mean(reports.iter().map(|r| r.precision)),
            recall: mean(reports.iter().map(|r| r.recall)),
            f1: mean(reports.iter().map(|r| r.f1)),
            auc: mean(reports.iter().map(|r| r.auc)),
            ar_predicted: mean(reports.iter().map(|r| r.ar_predicted)),
            ar_actual: mean(reports.iter().map(|r| r.ar_actual)),
            ar_relative_diff: mean(reports.iter().map(|r| r.ar_relative_diff)),
        }
    }
}

/// `(predicted − actual) / |actual|`, undefined at zero.
pub fn relative_difference(predicted: f64, actual: f64) -> Option<f64> {
    (actual != 0.0).then(|| (predicted - actual) / actual.abs())
}
