//! Acceptance suite. Runs without the test harness so that every criterion
//! prints exactly one PASS/FAIL line; tolerances and time limits are fixed here.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use confuse_cli::{cmd_forecast, cmd_train, RunConfig};
use confuse_core::data::synthetic::{synthetic_series, write_synthetic_dir};
use confuse_core::data::{prepare_stock, write_stock_csv, PrepareConfig};
use confuse_core::downstream::{classification_metrics, forest_fit, forest_predict_proba, ForestConfig};
use confuse_core::model::train;
use confuse_core::selfcheck::{analytic_gradient, auc_suite, gradient_suite, logdet_suite, prox_suite};
use confuse_core::{Activation, Dims, Matrix, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GRADIENT_TOL: f64 = 1e-5;
const PROX_TOL: f64 = 1e-9;
const LOGDET_VALUE_TOL: f64 = 1e-9;
const LOGDET_GRAD_TOL: f64 = 1e-5;
const SIGMA_FLOOR: f64 = 1e-12;
const AUC_MIN: f64 = 0.9;

fn verdict(criterion: u32, name: &str, pass: bool, detail: String, elapsed: Duration, limit: Option<Duration>) {
    let timing = match limit {
        Some(l) => format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    println!(
        "criterion {criterion} {name}: {} | {detail} | {timing}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn criterion_1_gradient_gate() -> bool {
    let limit = Duration::from_secs(10);
    let t0 = Instant::now();
    let suite = gradient_suite(0, analytic_gradient).unwrap();
    let elapsed = t0.elapsed();
    let pass = suite.max_error <= GRADIENT_TOL && within(elapsed, limit);
    verdict(
        1,
        "gradient gate",
        pass,
        format!("max relative error {:.2e} <= {GRADIENT_TOL:e}; {}", suite.max_error, suite.detail),
        elapsed,
        Some(limit),
    );
    pass
}

fn criterion_2_prox_equivalence() -> bool {
    let t0 = Instant::now();
    let suite = prox_suite(0, 20, 1000).unwrap();
    let pass = suite.passed && suite.max_error <= PROX_TOL;
    verdict(
        2,
        "prox-activation equivalence",
        pass,
        format!("oracle error {:.2e} <= {PROX_TOL:e}; {}", suite.max_error, suite.detail),
        t0.elapsed(),
        None,
    );
    pass
}

fn criterion_3_logdet() -> bool {
    let t0 = Instant::now();
    let (value, grad) = logdet_suite(0, 50).unwrap();
    let pass = value.max_error <= LOGDET_VALUE_TOL && grad.max_error <= LOGDET_GRAD_TOL;
    verdict(
        3,
        "log-det correctness",
        pass,
        format!(
            "value error {:.2e} <= {LOGDET_VALUE_TOL:e}, gradient error {:.2e} <= {LOGDET_GRAD_TOL:e}, 50 matrices",
            value.max_error, grad.max_error
        ),
        t0.elapsed(),
        None,
    );
    pass
}

fn criterion_4_training_stability() -> bool {
    let limit = Duration::from_secs(120);
    let t0 = Instant::now();
    let series = synthetic_series("SYN", 500, 0);
    let prepared = prepare_stock(&series, &PrepareConfig::default()).unwrap();
    let cfg = TrainConfig {
        epochs: 100,
        mu: 1e-4,
        lambda: 1e-2,
        seed: 0,
        ..Default::default()
    };
    let dims = Dims::default();
    assert_eq!((dims.filters, dims.filter_len, dims.window), (4, 5, 20));
    let out = train(&prepared.train, &cfg, dims, Activation::Selu).unwrap();
    let elapsed = t0.elapsed();

    let final_loss = *out.trace.last().unwrap();
    let ma: Vec<f64> = out.trace.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    // averages whose window ends in epochs 51..=100
    let tail = &ma[46..];
    let rises = tail.windows(2).filter(|w| w[1] > w[0]).count();
    let smin = out.sigma_min_trace.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = final_loss < out.initial_loss && rises == 0 && smin > SIGMA_FLOOR && within(elapsed, limit);
    verdict(
        4,
        "training stability",
        pass,
        format!(
            "loss {:.4} -> {final_loss:.4}, 5-epoch average rises in last half: {rises}, min sigma {smin:.3e} > {SIGMA_FLOOR:e}",
            out.initial_loss
        ),
        elapsed,
        Some(limit),
    );
    pass
}

fn synthetic_stock_dir(dir: &Path, days: usize) {
    std::fs::create_dir_all(dir).unwrap();
    write_stock_csv(dir.join("SYN.csv"), &synthetic_series("SYN", days, 0)).unwrap();
}

fn criterion_5_forecasting_utility() -> bool {
    let limit = Duration::from_secs(180);
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synthetic_stock_dir(&data, 500);
    let mut lines = Vec::new();
    let mut pass = true;
    for act in ["relu", "leakyrelu"] {
        let cfg = RunConfig {
            data_dir: Some(data.clone()),
            out_dir: tmp.path().join(act),
            activation: act.into(),
            ..Default::default()
        };
        cmd_train(&cfg).unwrap();
        let summary = cmd_forecast(&cfg).unwrap();
        let close = summary.average.mae.unwrap()[1];
        let naive = summary.average.mae_persistence.unwrap()[1];
        pass &= close <= naive;
        lines.push(format!("{act} close MAE {close:.5} vs persistence {naive:.5}"));
    }
    let elapsed = t0.elapsed();
    pass &= within(elapsed, limit);
    verdict(5, "forecasting utility", pass, lines.join(", "), elapsed, Some(limit));
    pass
}

fn criterion_6_trading_pipeline() -> bool {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = 16;
    // BUY iff the first two coordinates sum above zero, with a margin
    let mut draw = |n: usize| {
        let mut labels = Vec::with_capacity(n);
        let z = Matrix::from_fn(n, f, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut z = z;
        for i in 0..n {
            let buy = i % 2 == 0;
            let shift = if buy { 1.5 } else { -1.5 };
            z[(i, 0)] += shift;
            z[(i, 1)] += shift;
            labels.push(buy);
        }
        (z, labels)
    };
    let (ztr, ytr) = draw(400);
    let (zte, yte) = draw(200);
    let forest = forest_fit(&ztr, &ytr, &ForestConfig::default()).unwrap();
    let probs = forest_predict_proba(&forest, &zte).unwrap();
    let m = classification_metrics(&probs, &yte, 0.5).unwrap();
    let auc = m.auc.unwrap();
    let oracle = auc_suite(0, 500).unwrap();
    let pass = auc >= AUC_MIN && oracle.max_error == 0.0;
    verdict(
        6,
        "trading pipeline",
        pass,
        format!(
            "planted-structure AUC {auc:.4} >= {AUC_MIN}, F1 {:.3}; midrank vs pairwise max difference {} over 500 sets of <= 100 points",
            m.f1, oracle.max_error
        ),
        t0.elapsed(),
        None,
    );
    pass
}

fn criterion_7_determinism() -> bool {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synthetic_dir(&data, 2, 300, 4).unwrap();
    let run = |name: &str| {
        let cfg = RunConfig {
            data_dir: Some(data.clone()),
            out_dir: tmp.path().join(name),
            activation: "prelu".into(),
            epochs: 10,
            ..Default::default()
        };
        cmd_train(&cfg).unwrap();
        cfg.out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let mut same = true;
    let mut compared = 0;
    for stock in ["SYN0", "SYN1"] {
        for file in ["loss_trace.csv", "model.cfm"] {
            let x = std::fs::read(a.join(stock).join(file)).unwrap();
            let y = std::fs::read(b.join(stock).join(file)).unwrap();
            same &= x == y;
            compared += 1;
        }
    }
    verdict(
        7,
        "determinism",
        same,
        format!("{compared} files compared byte for byte"),
        t0.elapsed(),
        None,
    );
    same
}

fn criterion_8_end_to_end() -> bool {
    let limit = Duration::from_secs(300);
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synthetic_dir(&data, 3, 300, 8).unwrap();
    let bin = env!("CARGO_BIN_EXE_confuse");
    let mut failures = Vec::new();
    for act in ["selu", "relu", "prelu", "leakyrelu", "tanh", "sigmoid"] {
        let out = tmp.path().join(act);
        for cmd in ["train", "forecast", "trade"] {
            let status = Command::new(bin)
                .args([cmd, "--activation", act, "--data-dir"])
                .arg(&data)
                .arg("--out-dir")
                .arg(&out)
                .output()
                .unwrap();
            if !status.status.success() {
                failures.push(format!("{act} {cmd}: {}", String::from_utf8_lossy(&status.stderr).trim()));
            }
        }
        let mut expected = vec![
            out.join("config.toml"),
            out.join("forecast_summary.txt"),
            out.join("forecast_summary.json"),
            out.join("trade_summary.txt"),
            out.join("trade_summary.json"),
        ];
        for s in ["SYN0", "SYN1", "SYN2"] {
            for f in [
                "model.cfm",
                "loss_trace.csv",
                "train_summary.txt",
                "predictions.csv",
                "forecast_report.txt",
                "forecast_report.json",
                "decisions.csv",
                "trade_report.txt",
                "trade_report.json",
            ] {
                expected.push(out.join(s).join(f));
            }
        }
        for p in expected {
            if !p.is_file() {
                failures.push(format!("missing {}", p.display()));
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = failures.is_empty() && within(elapsed, limit);
    let detail = if failures.is_empty() {
        "3 stocks x 6 activations, train -> forecast -> trade, all reports written".to_string()
    } else {
        failures.join("; ")
    };
    verdict(8, "end-to-end dry run", pass, detail, elapsed, Some(limit));
    pass
}

fn main() -> ExitCode {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_gradient_gate,
        criterion_2_prox_equivalence,
        criterion_3_logdet,
        criterion_4_training_stability,
        criterion_5_forecasting_utility,
        criterion_6_trading_pipeline,
        criterion_7_determinism,
        criterion_8_end_to_end,
    ];
    let mut failed = 0;
    for (i, run) in criteria.into_iter().enumerate() {
        // a panic counts as a failure of that criterion only
        match std::panic::catch_unwind(run) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(_) => {
                println!("criterion {}: FAIL | panicked", i + 1);
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
