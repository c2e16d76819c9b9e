//! Oracle suites: finite-difference gradients, prox optimality, convolution,
//! log-determinant and AUC. Each suite reports its worst error against a
//! fixed tolerance.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{prox_nonneg, Activation};
use crate::ctl::{ctl_objective, CtlHyper, FilterBank};
use crate::data::{Label, WindowedSample};
use crate::downstream::auc_midrank;
use crate::error::{Error, Result};
use crate::linalg::{circular_conv1d, logdet_grad, logdet_rect, toeplitz_from_signal, Matrix};
use crate::model::{ConFuseModel, Dims, JointGrad};

pub const GRADIENT_TOL: f64 = 1e-5;
pub const PROX_TOL: f64 = 1e-9;
pub const CONV_TOL: f64 = 1e-10;
pub const LOGDET_VALUE_TOL: f64 = 1e-9;
pub const LOGDET_GRAD_TOL: f64 = 1e-5;

/// Central-difference step.
const FD_STEP: f64 = 1e-6;
/// Denominator floor for relative errors, so entries near zero are compared
/// on an absolute scale.
const REL_FLOOR: f64 = 1e-4;
/// Pre-activations closer than this to the origin are re-drawn.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("selfcheck seed {}\n", self.seed);
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{} {:<10} max_error {:.3e} (tol {:.0e})  {}",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                s.max_error,
                s.tolerance,
                s.detail
            );
        }
        let _ = writeln!(out, "{}", if self.passed() { "all suites passed" } else { "selfcheck FAILED" });
        out
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Gradient function under test; [`ConFuseModel::joint_grad`] in production.
pub type GradientFn = fn(&ConFuseModel, &[WindowedSample], &[usize]) -> Result<JointGrad>;

pub fn analytic_gradient(model: &ConFuseModel, samples: &[WindowedSample], batch: &[usize]) -> Result<JointGrad> {
    model.joint_grad(samples, batch)
}

pub const GRADIENT_DIMS: Dims = Dims {
    channels: 2,
    window: 8,
    filters: 2,
    filter_len: 3,
    fused: 4,
};
pub const GRADIENT_SAMPLES: usize = 3;

fn placeholder_sample(windows: Vec<Vec<f64>>) -> WindowedSample {
    let d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    WindowedSample {
        windows,
        target: [0.0; 5],
        label: Label::Sell,
        anchor_date: d,
        target_date: d,
    }
}

fn min_abs_preactivation(model: &ConFuseModel, samples: &[WindowedSample]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for s in samples {
        for (bank, w) in model.banks.iter().zip(&s.windows) {
            for &p in bank.responses(w)?.as_slice() {
                m = m.min(p.abs());
            }
        }
    }
    Ok(m)
}

/// Seeded instance with codes uniform in `[0.5, 1.5]` and every
/// pre-activation at least `KINK_MARGIN` away from zero.
pub fn gradient_instance(activation: Activation, seed: u64) -> Result<(ConFuseModel, Vec<WindowedSample>)> {
    let hyper = CtlHyper {
        mu: 1e-2,
        lambda: 1e-1,
        activation,
    };
    let dims = GRADIENT_DIMS;
    for attempt in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
        let mut model = ConFuseModel::init(dims, hyper, &mut rng)?;
        // a larger fusion scale keeps the data term comparable to the penalty
        model.fusion = model.fusion.scaled(4.0);
        let samples: Vec<WindowedSample> = (0..GRADIENT_SAMPLES)
            .map(|_| {
                placeholder_sample(
                    (0..dims.channels)
                        .map(|_| (0..dims.window).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect(),
                )
            })
            .collect();
        model.z_train = Matrix::from_fn(GRADIENT_SAMPLES, dims.fused, |_, _| rng.random_range(0.5..1.5));
        if min_abs_preactivation(&model, &samples)? >= KINK_MARGIN {
            return Ok((model, samples));
        }
    }
    Err(Error::Config("no kink-free gradient instance found".into()))
}

fn central_difference(
    model: &mut ConFuseModel,
    samples: &[WindowedSample],
    get: impl Fn(&mut ConFuseModel) -> &mut f64,
) -> Result<f64> {
    let orig = *get(model);
    *get(model) = orig + FD_STEP;
    let plus = model.full_loss(samples)?;
    *get(model) = orig - FD_STEP;
    let minus = model.full_loss(samples)?;
    *get(model) = orig;
    Ok((plus - minus) / (2.0 * FD_STEP))
}

/// Maximum relative error per gradient block (`bank.c`, `fusion`, `codes`,
/// `slope`) against central differences of the full-batch loss.
pub fn check_gradients(
    model: &ConFuseModel,
    samples: &[WindowedSample],
    grad_fn: GradientFn,
) -> Result<Vec<(String, f64)>> {
    let batch: Vec<usize> = (0..samples.len()).collect();
    let g = grad_fn(model, samples, &batch)?;
    let mut work = model.clone();
    let mut blocks = Vec::new();

    for c in 0..model.banks.len() {
        let mut worst: f64 = 0.0;
        for i in 0..model.banks[c].taps.as_slice().len() {
            let num = central_difference(&mut work, samples, |m| &mut m.banks[c].taps.as_mut_slice()[i])?;
            worst = worst.max(rel_err(g.banks[c].as_slice()[i], num));
        }
        blocks.push((format!("bank.{c}"), worst));
    }

    let mut worst: f64 = 0.0;
    for i in 0..model.fusion.as_slice().len() {
        let num = central_difference(&mut work, samples, |m| &mut m.fusion.as_mut_slice()[i])?;
        worst = worst.max(rel_err(g.fusion.as_slice()[i], num));
    }
    blocks.push(("fusion".into(), worst));

    let mut worst: f64 = 0.0;
    for (k, row) in &g.z_rows {
        for (j, &a) in row.iter().enumerate() {
            let num = central_difference(&mut work, samples, |m| &mut m.z_train[(*k, j)])?;
            worst = worst.max(rel_err(a, num));
        }
    }
    blocks.push(("codes".into(), worst));

    if let (Some(a), Some(s)) = (g.slope, model.activation.slope()) {
        let eval = |slope: f64| -> Result<f64> {
            let mut m = model.clone();
            m.activation = m.activation.with_slope(slope);
            m.hyper.activation = m.activation;
            m.full_loss(samples)
        };
        let num = (eval(s + FD_STEP)? - eval(s - FD_STEP)?) / (2.0 * FD_STEP);
        blocks.push(("slope".into(), rel_err(a, num)));
    }
    Ok(blocks)
}

/// Gradient check over all six activation kinds.
pub fn gradient_suite(seed: u64, grad_fn: GradientFn) -> Result<SuiteResult> {
    let mut max_error: f64 = 0.0;
    let mut detail = String::new();
    for act in Activation::ALL {
        let (model, samples) = gradient_instance(act, seed)?;
        let blocks = check_gradients(&model, &samples, grad_fn)?;
        let worst = blocks.iter().map(|(_, e)| *e).fold(0.0, f64::max);
        max_error = max_error.max(worst);
        let _ = write!(detail, "{}={worst:.1e} ", act.tag());
    }
    Ok(SuiteResult {
        name: "gradient",
        max_error,
        tolerance: GRADIENT_TOL,
        passed: max_error <= GRADIENT_TOL,
        detail: detail.trim_end().to_string(),
    })
}

/// Independent projection oracle: projected gradient descent on
/// `½‖x − v‖²` over `x ≥ 0`, which contracts by half each iteration.
fn projection_oracle(v: &Matrix) -> Matrix {
    let mut x = Matrix::zeros(v.rows(), v.cols());
    for _ in 0..200 {
        x = Matrix::from_fn(v.rows(), v.cols(), |i, j| (x[(i, j)] - 0.5 * (x[(i, j)] - v[(i, j)])).max(0.0));
    }
    x
}

/// With `T` fixed, `X = max(S T, 0)` must beat random feasible perturbations
/// and agree with the projection oracle.
pub fn prox_suite(seed: u64, trials: usize, perturbations: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = CtlHyper {
        mu: 1e-2,
        lambda: 1e-1,
        activation: Activation::Relu,
    };
    let (l, p, m, k) = (8, 3, 2, 3);
    let mut max_error: f64 = 0.0;
    let mut losses = 0usize;
    for _ in 0..trials {
        let bank = FilterBank::random(p, m, &mut rng);
        let signals: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..l).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut best = Vec::with_capacity(k);
        for s in &signals {
            let v = bank.responses(s)?;
            let x = prox_nonneg(&v);
            max_error = max_error.max(x.sub(&projection_oracle(&v))?.max_abs());
            best.push(x);
        }
        let opt = ctl_objective(&bank, &best, &signals, &hyper)?;
        for _ in 0..perturbations {
            let scale = 10f64.powf(rng.random_range(-4.0..0.0));
            let cand: Vec<Matrix> = best
                .iter()
                .map(|x| {
                    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        (x[(i, j)] + scale * rng.random_range(-1.0..1.0)).max(0.0)
                    })
                })
                .collect();
            if ctl_objective(&bank, &cand, &signals, &hyper)? < opt {
                losses += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "prox",
        max_error,
        tolerance: PROX_TOL,
        passed: max_error <= PROX_TOL && losses == 0,
        detail: format!("{trials} trials x {perturbations} perturbations, {losses} beat the closed form"),
    })
}

/// Circular convolution via a naive DFT, shifted by the kernel offset.
fn dft_conv(signal: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let dft = |x: &[f64]| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                    let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                    (re + v * a.cos(), im + v * a.sin())
                })
            })
            .collect()
    };
    let mut padded = filter.to_vec();
    padded.resize(n, 0.0);
    let (fs, ff) = (dft(signal), dft(&padded));
    let prod: Vec<(f64, f64)> = fs
        .iter()
        .zip(&ff)
        .map(|(a, b)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0))
        .collect();
    let plain: Vec<f64> = (0..n)
        .map(|t| {
            prod.iter().enumerate().fold(0.0, |acc, (k, &(re, im))| {
                let a = 2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                acc + re * a.cos() - im * a.sin()
            }) / n as f64
        })
        .collect();
    let off = (filter.len() - 1) / 2;
    (0..n).map(|i| plain[(i + off) % n]).collect()
}

/// Toeplitz product and direct convolution against a DFT oracle.
pub fn conv_suite(seed: u64, trials: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..trials {
        let l = rng.random_range(1..=32usize);
        let p = rng.random_range(1..=l.min(9));
        let s: Vec<f64> = (0..l).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let oracle = dft_conv(&s, &f);
        let direct = circular_conv1d(&s, &f)?;
        let via_matrix = toeplitz_from_signal(&s, p)?.matvec(&f)?;
        for ((a, b), o) in direct.iter().zip(&via_matrix).zip(&oracle) {
            max_error = max_error.max((a - o).abs()).max((b - o).abs());
        }
    }
    Ok(SuiteResult {
        name: "conv",
        max_error,
        tolerance: CONV_TOL,
        passed: max_error <= CONV_TOL,
        detail: format!("{trials} random signal/filter pairs"),
    })
}

/// `log |det a|` by LU with partial pivoting.
pub fn lu_log_abs_det(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m = a.clone();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .expect("non-empty");
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
        }
        let d = m[(col, col)];
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += d.abs().ln();
        for i in col + 1..n {
            let factor = m[(i, col)] / d;
            for j in col..n {
                m[(i, j)] -= factor * m[(col, j)];
            }
        }
    }
    acc
}

/// `½·log det(mᵀm)` for tall inputs, `½·log det(m mᵀ)` for wide ones.
pub fn logdet_gram_oracle(m: &Matrix) -> Result<f64> {
    let t = m.transpose();
    let gram = if m.rows() >= m.cols() { t.matmul(m)? } else { m.matmul(&t)? };
    Ok(0.5 * lu_log_abs_det(&gram))
}

/// Value against the Gram oracle and gradient against central differences,
/// on random full-rank shapes up to 16×8 (and their transposes).
pub fn logdet_suite(seed: u64, count: usize) -> Result<(SuiteResult, SuiteResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut value_err, mut grad_err): (f64, f64) = (0.0, 0.0);
    for i in 0..count {
        let cols = rng.random_range(1..=8usize);
        let rows = rng.random_range(cols..=16usize);
        let mut m = Matrix::random_uniform(rows, cols, 1.0, &mut rng);
        if i % 2 == 1 {
            m = m.transpose();
        }
        let v = logdet_rect(&m)?;
        value_err = value_err.max((v - logdet_gram_oracle(&m)?).abs() / v.abs().max(1.0));
        let g = logdet_grad(&m)?;
        let mut w = m.clone();
        for idx in 0..w.as_slice().len() {
            let orig = w.as_slice()[idx];
            w.as_mut_slice()[idx] = orig + FD_STEP;
            let plus = logdet_rect(&w)?;
            w.as_mut_slice()[idx] = orig - FD_STEP;
            let minus = logdet_rect(&w)?;
            w.as_mut_slice()[idx] = orig;
            grad_err = grad_err.max(rel_err(g.as_slice()[idx], (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    Ok((
        SuiteResult {
            name: "logdet",
            max_error: value_err,
            tolerance: LOGDET_VALUE_TOL,
            passed: value_err <= LOGDET_VALUE_TOL,
            detail: format!("{count} matrices vs Gram determinant"),
        },
        SuiteResult {
            name: "logdet-grad",
            max_error: grad_err,
            tolerance: LOGDET_GRAD_TOL,
            passed: grad_err <= LOGDET_GRAD_TOL,
            detail: format!("{count} matrices vs central differences"),
        },
    ))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating all pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Midrank AUC against the pairwise count on sets of at most 100 points.
pub fn auc_suite(seed: u64, trials: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(2..=100usize);
        let levels = rng.random_range(2..=20u32);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let (a, b) = (auc_midrank(&scores, &labels), pairwise_auc(&scores, &labels));
        match (a, b) {
            (Some(a), Some(b)) => max_error = max_error.max((a - b).abs()),
            (None, None) => {}
            _ => max_error = f64::INFINITY,
        }
    }
    Ok(SuiteResult {
        name: "auc",
        max_error,
        tolerance: 0.0,
        passed: max_error == 0.0,
        detail: format!("{trials} tied score sets"),
    })
}

pub fn run_selfcheck(seed: u64) -> Result<SelfCheckReport> {
    run_selfcheck_with(seed, analytic_gradient)
}

pub fn run_selfcheck_with(seed: u64, grad_fn: GradientFn) -> Result<SelfCheckReport> {
    let (ld, ld_grad) = logdet_suite(seed, 50)?;
    Ok(SelfCheckReport {
        seed,
        suites: vec![
            gradient_suite(seed, grad_fn)?,
            prox_suite(seed, 10, 1000)?,
            conv_suite(seed, 200)?,
            ld,
            ld_grad,
            auc_suite(seed, 200)?,
        ],
    })
}
