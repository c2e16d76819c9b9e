//! The subcommands. Each stock is processed independently, in parallel, and
//! writes under `<out_dir>/<SYMBOL>/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use confuse_core::data::{
    load_stock_csv, prepare_stock, prepare_stock_with_norm, Channel, MultiChannelSeries, NormParams, PreparedStock,
    WindowedSample, NUM_CHANNELS,
};
use confuse_core::downstream::{
    annualized_return, classification_metrics, forest_fit, forest_predict_proba, mae, relative_difference, ridge_fit,
    ridge_predict, EvalReport,
};
use confuse_core::model::{read_model, train, write_model, ModelFile};
use confuse_core::selfcheck::{run_selfcheck, SelfCheckReport};
use confuse_core::{ConFuseModel, Matrix};

use crate::config::{MaeScale, RunConfig};
use crate::error::CliError;

pub const MODEL_FILE: &str = "model.cfm";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const TRAIN_SUMMARY_FILE: &str = "train_summary.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const FORECAST_REPORT: &str = "forecast_report";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const TRADE_REPORT: &str = "trade_report";

/// Per-stock seed from the master seed and the symbol, independent of how
/// many stocks run or in which order.
pub fn stock_seed(master: u64, symbol: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in symbol.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    master ^ h
}

/// CSV files in `data`, sorted by name; a single file is accepted as is.
pub fn stock_files(data: &Path) -> Result<Vec<PathBuf>, CliError> {
    if data.is_file() {
        return Ok(vec![data.to_path_buf()]);
    }
    let entries = std::fs::read_dir(data).map_err(|e| CliError::io(data, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(data, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::core(
            data.display().to_string(),
            confuse_core::Error::Data("no CSV files found".into()),
        ));
    }
    Ok(files)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_report(dir: &Path, stem: &str, report: &impl Serialize, text: &str) -> Result<(), CliError> {
    write_file(&dir.join(format!("{stem}.txt")), text)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&dir.join(format!("{stem}.json")), &json)
}

/// Runs `f` on every stock in parallel; the first failure in file order wins.
fn for_each_stock<T: Send>(
    cfg: &RunConfig,
    f: impl Fn(&Path) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    let files = stock_files(cfg.data_dir()?)?;
    files.par_iter().map(|p| f(p)).collect::<Vec<_>>().into_iter().collect()
}

fn load(path: &Path) -> Result<MultiChannelSeries, CliError> {
    let (series, _) = load_stock_csv(path).map_err(|e| CliError::core("load", e))?;
    Ok(series)
}

#[derive(Debug, Clone, Serialize)]
pub struct StockTrain {
    pub symbol: String,
    pub initial_loss: f64,
    pub final_loss: Option<f64>,
    pub epochs: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub model_path: PathBuf,
}

/// Trains one model per stock; writes the model, the epoch loss trace and the
/// resolved config.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<StockTrain>, CliError> {
    cfg.persist()?;
    let activation = cfg.activation()?;
    for_each_stock(cfg, |path| {
        let series = load(path)?;
        let symbol = series.symbol.clone();
        let ctx = |stage: &str| format!("{symbol}: {stage}");
        let prepared = prepare_stock(&series, &cfg.prepare()).map_err(|e| CliError::core(ctx("prepare"), e))?;
        let tc = cfg.train_config(stock_seed(cfg.seed, &symbol));
        let out = train(&prepared.train, &tc, cfg.dims(), activation).map_err(|e| CliError::core(ctx("train"), e))?;

        let dir = cfg.out_dir.join(&symbol);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let model_path = dir.join(MODEL_FILE);
        let file = ModelFile {
            model: out.model,
            symbol: Some(symbol.clone()),
            norm: Some(prepared.norm),
            train_config: Some(tc),
        };
        write_model(&model_path, &file).map_err(|e| CliError::core(ctx("write model"), e))?;

        let mut trace = String::from("epoch,loss,sigma_min\n");
        for (i, (l, s)) in out.trace.iter().zip(&out.sigma_min_trace).enumerate() {
            let _ = writeln!(trace, "{},{l},{s}", i + 1);
        }
        write_file(&dir.join(LOSS_TRACE_FILE), &trace)?;

        let summary = StockTrain {
            symbol: symbol.clone(),
            initial_loss: out.initial_loss,
            final_loss: out.trace.last().copied(),
            epochs: out.trace.len(),
            train_samples: prepared.train.len(),
            test_samples: prepared.test.len(),
            model_path,
        };
        let text = format!(
            "symbol = {}\ninitial_loss = {}\nfinal_loss = {}\nepochs = {}\ntrain_samples = {}\ntest_samples = {}\n",
            summary.symbol,
            summary.initial_loss,
            summary.final_loss.map_or("nan".into(), |l| l.to_string()),
            summary.epochs,
            summary.train_samples,
            summary.test_samples
        );
        write_file(&dir.join(TRAIN_SUMMARY_FILE), &text)?;
        Ok(summary)
    })
}

/// A stock's trained model with its data re-prepared the same way.
struct Loaded {
    symbol: String,
    series: MultiChannelSeries,
    model: ConFuseModel,
    norm: NormParams,
    prepared: PreparedStock,
}

fn load_trained(cfg: &RunConfig, path: &Path) -> Result<Loaded, CliError> {
    let series = load(path)?;
    let symbol = series.symbol.clone();
    let model_path = cfg.model_dir().join(&symbol).join(MODEL_FILE);
    let file = read_model(&model_path).map_err(|e| CliError::core(format!("{symbol}: load model"), e))?;
    let dims = file.model.dims;
    if dims.window != cfg.window_len || dims.channels != NUM_CHANNELS {
        return Err(CliError::core(
            format!("{symbol}: model"),
            confuse_core::Error::Dimension(format!(
                "model expects {} channels with windows of {}, run uses {} channels with windows of {}",
                dims.channels, dims.window, NUM_CHANNELS, cfg.window_len
            )),
        ));
    }
    let prepared = match file.norm {
        Some(n) => prepare_stock_with_norm(&series, &cfg.prepare(), n),
        None => prepare_stock(&series, &cfg.prepare()),
    }
    .map_err(|e| CliError::core(format!("{symbol}: prepare"), e))?;
    if prepared.test.is_empty() {
        return Err(CliError::core(
            format!("{symbol}: prepare"),
            confuse_core::Error::Data("test split is empty".into()),
        ));
    }
    Ok(Loaded {
        symbol,
        series,
        model: file.model,
        norm: prepared.norm,
        prepared,
    })
}

fn codes(model: &ConFuseModel, samples: &[WindowedSample]) -> confuse_core::Result<Matrix> {
    let rows = samples
        .iter()
        .map(|s| model.extract_features(&s.windows))
        .collect::<confuse_core::Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, model.dims.fused));
    }
    Matrix::from_rows(&rows)
}

fn targets(samples: &[WindowedSample]) -> Matrix {
    Matrix::from_fn(samples.len(), NUM_CHANNELS, |i, j| samples[i].target[j])
}

fn persistence(samples: &[WindowedSample]) -> Matrix {
    Matrix::from_fn(samples.len(), NUM_CHANNELS, |i, j| samples[i].last(Channel::ALL[j]))
}

fn denormalize(norm: &NormParams, m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| norm.inverse(j, m[(i, j)]))
}

fn fmt_row(out: &mut String, date: impl std::fmt::Display, values: impl IntoIterator<Item = f64>) {
    let _ = write!(out, "{date}");
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

#[derive(Debug, Clone, Serialize)]
pub struct StockReport {
    pub symbol: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub stocks: Vec<StockReport>,
    /// Plain mean over stocks.
    pub average: EvalReport,
}

fn summarize(cfg: &RunConfig, stem: &str, stocks: Vec<StockReport>) -> Result<Summary, CliError> {
    let reports: Vec<EvalReport> = stocks.iter().map(|s| s.report.clone()).collect();
    let summary = Summary {
        average: EvalReport::average(&reports),
        stocks,
    };
    let mut text = format!("# average over {} stocks\n", summary.stocks.len());
    text.push_str(&summary.average.to_key_value());
    for s in &summary.stocks {
        let _ = write!(text, "\n# {}\n{}", s.symbol, s.report.to_key_value());
    }
    write_report(&cfg.out_dir, &format!("{stem}_summary"), &summary, &text)?;
    Ok(summary)
}

/// Ridge regression from codes to next-day values, per stock, with the
/// persistence baseline alongside.
pub fn cmd_forecast(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.persist()?;
    let stocks = for_each_stock(cfg, |path| {
        let l = load_trained(cfg, path)?;
        let ctx = format!("{}: forecast", l.symbol);
        let run = || -> confuse_core::Result<(Matrix, Matrix, Matrix)> {
            let ztr = codes(&l.model, &l.prepared.train)?;
            let zte = codes(&l.model, &l.prepared.test)?;
            let ridge = ridge_fit(&ztr, &targets(&l.prepared.train), cfg.ridge_alpha)?;
            Ok((
                ridge_predict(&ridge, &zte)?,
                targets(&l.prepared.test),
                persistence(&l.prepared.test),
            ))
        };
        let (mut pred, mut actual, mut naive) = run().map_err(|e| CliError::core(&ctx, e))?;
        if cfg.mae_scale == MaeScale::Raw {
            pred = denormalize(&l.norm, &pred);
            actual = denormalize(&l.norm, &actual);
            naive = denormalize(&l.norm, &naive);
        }
        let err = mae(&pred, &actual).map_err(|e| CliError::core(&ctx, e))?;
        let err_naive = mae(&naive, &actual).map_err(|e| CliError::core(&ctx, e))?;

        let mut csv = String::from("date");
        for prefix in ["pred", "actual"] {
            for c in Channel::ALL {
                let _ = write!(csv, ",{prefix}_{}", c.name());
            }
        }
        csv.push('\n');
        for (i, s) in l.prepared.test.iter().enumerate() {
            fmt_row(&mut csv, s.target_date, pred.row(i).iter().chain(actual.row(i)).copied());
        }
        let dir = cfg.out_dir.join(&l.symbol);
        write_file(&dir.join(PREDICTIONS_FILE), &csv)?;

        let report = EvalReport {
            mae: Some(std::array::from_fn(|j| err[j])),
            mae_persistence: Some(std::array::from_fn(|j| err_naive[j])),
            ..Default::default()
        };
        write_report(&dir, FORECAST_REPORT, &report, &report.to_key_value())?;
        Ok(StockReport {
            symbol: l.symbol,
            report,
        })
    })?;
    summarize(cfg, "forecast", stocks)
}

/// Random forest BUY/SELL classification on codes, per stock, plus the
/// annualized return of trading on the decisions.
pub fn cmd_trade(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.persist()?;
    let stocks = for_each_stock(cfg, |path| {
        let l = load_trained(cfg, path)?;
        let ctx = format!("{}: trade", l.symbol);
        let test = &l.prepared.test;
        let closes: Vec<f64> = test
            .iter()
            .map(|s| {
                l.series
                    .dates
                    .binary_search(&s.anchor_date)
                    .map(|t| l.series.channel(Channel::Close)[t])
                    .map_err(|_| confuse_core::Error::Data(format!("anchor {} missing from series", s.anchor_date)))
            })
            .collect::<confuse_core::Result<_>>()
            .map_err(|e| CliError::core(&ctx, e))?;
        let run = || -> confuse_core::Result<(Vec<f64>, Vec<bool>)> {
            let ztr = codes(&l.model, &l.prepared.train)?;
            let zte = codes(&l.model, test)?;
            let ytr: Vec<bool> = l.prepared.train.iter().map(|s| s.label.is_buy()).collect();
            let forest = forest_fit(&ztr, &ytr, &cfg.forest(stock_seed(cfg.seed, &l.symbol)))?;
            Ok((forest_predict_proba(&forest, &zte)?, test.iter().map(|s| s.label.is_buy()).collect()))
        };
        let (probs, truth) = run().map_err(|e| CliError::core(&ctx, e))?;
        let decisions: Vec<bool> = probs.iter().map(|&p| p >= cfg.threshold).collect();
        let m = classification_metrics(&probs, &truth, cfg.threshold).map_err(|e| CliError::core(&ctx, e))?;
        let (ar_predicted, ar_actual) = if closes.len() >= 2 {
            let p = annualized_return(&decisions, &closes).map_err(|e| CliError::core(&ctx, e))?;
            let a = annualized_return(&truth, &closes).map_err(|e| CliError::core(&ctx, e))?;
            (Some(p), Some(a))
        } else {
            (None, None)
        };

        let mut csv = String::from("date,decision\n");
        for (s, &d) in test.iter().zip(&decisions) {
            let _ = writeln!(csv, "{},{}", s.anchor_date, if d { "BUY" } else { "SELL" });
        }
        let dir = cfg.out_dir.join(&l.symbol);
        write_file(&dir.join(DECISIONS_FILE), &csv)?;

        let report = EvalReport {
            precision: Some(m.precision),
            recall: Some(m.recall),
            f1: Some(m.f1),
            auc: m.auc,
            ar_predicted,
            ar_actual,
            ar_relative_diff: ar_predicted.zip(ar_actual).and_then(|(p, a)| relative_difference(p, a)),
            ..Default::default()
        };
        write_report(&dir, TRADE_REPORT, &report, &report.to_key_value())?;
        Ok(StockReport {
            symbol: l.symbol,
            report,
        })
    })?;
    summarize(cfg, "trade", stocks)
}

/// Writes the codes of every train and test window, one row per anchor date.
pub fn cmd_features(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.persist()?;
    let written = for_each_stock(cfg, |path| {
        let l = load_trained(cfg, path)?;
        let dir = cfg.out_dir.join(&l.symbol);
        let mut out = Vec::new();
        for (name, samples) in [("train", &l.prepared.train), ("test", &l.prepared.test)] {
            let z = codes(&l.model, samples).map_err(|e| CliError::core(format!("{}: features", l.symbol), e))?;
            let mut csv = String::from("date");
            for j in 0..z.cols() {
                let _ = write!(csv, ",z{j}");
            }
            csv.push('\n');
            for (i, s) in samples.iter().enumerate() {
                fmt_row(&mut csv, s.anchor_date, z.row(i).iter().copied());
            }
            let p = dir.join(format!("features_{name}.csv"));
            write_file(&p, &csv)?;
            out.push(p);
        }
        Ok(out)
    })?;
    Ok(written.into_iter().flatten().collect())
}

pub fn cmd_selfcheck(seed: u64) -> Result<SelfCheckReport, CliError> {
    run_selfcheck(seed).map_err(|e| CliError::core("selfcheck", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_symbol_and_master() {
        assert_ne!(stock_seed(0, "AAA"), stock_seed(0, "AAB"));
        assert_ne!(stock_seed(0, "AAA"), stock_seed(1, "AAA"));
        assert_eq!(stock_seed(7, "X"), stock_seed(7, "X"));
    }

    #[test]
    fn missing_data_dir_is_config_error() {
        let out = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            out_dir: out.path().into(),
            ..Default::default()
        };
        assert_eq!(cmd_forecast(&cfg).unwrap_err().exit_code(), 2);
    }
}
