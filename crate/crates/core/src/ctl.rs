//! Single-channel convolutional transform learning.
//!
//! A bank of `M` filters of length `P` is stored as the `P × M` matrix
//! `T = [t_1 | … | t_M]`. For a signal `s`, `S · T` stacks the circular
//! convolutions `t_m * s` column-wise, where `S` is the circulant matrix of
//! `s`. The feature penalty here is fixed to the non-negativity indicator, so
//! the exact feature update is `X = max(S·T, 0)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{prox_nonneg, Activation};
use crate::error::{Error, Result};
use crate::linalg::{logdet_rect, logdet_with_grad, toeplitz_from_signal, Matrix};

/// `P × M` filter matrix, one filter per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub taps: Matrix,
}

impl FilterBank {
    pub fn new(taps: Matrix) -> Self {
        FilterBank { taps }
    }

    /// Entries i.i.d. uniform on `[-1/√(PM), 1/√(PM)]`.
    pub fn random<R: Rng + ?Sized>(filter_len: usize, num_filters: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((filter_len * num_filters) as f64).sqrt();
        FilterBank {
            taps: Matrix::random_uniform(filter_len, num_filters, bound, rng),
        }
    }

    pub fn filter_len(&self) -> usize {
        self.taps.rows()
    }

    pub fn num_filters(&self) -> usize {
        self.taps.cols()
    }

    /// `S · T` for one signal: `L × M` pre-activations.
    pub fn responses(&self, signal: &[f64]) -> Result<Matrix> {
        toeplitz_from_signal(signal, self.filter_len())?.matmul(&self.taps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtlHyper {
    pub mu: f64,
    pub lambda: f64,
    pub activation: Activation,
}

impl CtlHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0 && self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "mu and lambda must be finite and non-negative (mu = {}, lambda = {})",
                self.mu, self.lambda
            )));
        }
        self.activation.validate()
    }
}

/// `Φ(S · T)`, shape `L × M`.
pub fn ctl_features(bank: &FilterBank, signal: &[f64], activation: Activation) -> Result<Matrix> {
    Ok(activation.apply(&bank.responses(signal)?))
}

/// `μ‖T‖² − λ·logdet(T)`; the log-det term is skipped when `λ = 0`.
fn transform_penalty(taps: &Matrix, mu: f64, lambda: f64) -> Result<f64> {
    let mut value = mu * taps.frobenius_sq();
    if lambda != 0.0 {
        value -= lambda * logdet_rect(taps)?;
    }
    Ok(value)
}

/// `½ Σ_k (‖S_k T − X_k‖² + ι₊(X_k)) + μ‖T‖² − λ·logdet(T)`.
///
/// Returns `+∞` when any feature matrix has a negative entry.
pub fn ctl_objective(
    bank: &FilterBank,
    features: &[Matrix],
    signals: &[Vec<f64>],
    hyper: &CtlHyper,
) -> Result<f64> {
    if features.len() != signals.len() {
        return Err(Error::dim(format!(
            "{} feature matrices for {} signals",
            features.len(),
            signals.len()
        )));
    }
    if features.iter().any(|x| x.as_slice().iter().any(|&v| v < 0.0)) {
        return Ok(f64::INFINITY);
    }
    let mut data = 0.0;
    for (x, s) in features.iter().zip(signals) {
        data += bank.responses(s)?.sub(x)?.frobenius_sq();
    }
    Ok(0.5 * data + transform_penalty(&bank.taps, hyper.mu, hyper.lambda)?)
}

/// Output of [`ctl_prox_alternating`].
#[derive(Debug, Clone)]
pub struct CtlSolution {
    pub bank: FilterBank,
    pub features: Vec<Matrix>,
    /// Objective after each completed iteration.
    pub trace: Vec<f64>,
    /// Step size in use when the solver stopped.
    pub final_step: f64,
}

const MAX_HALVINGS: usize = 60;

/// Proximal alternating minimization with the penalty fixed to `ι₊`.
///
/// Each iteration sets `X_k = max(S_k T, 0)` exactly, then takes a gradient
/// step on `T` for the smooth terms, halving the step (and keeping it halved)
/// whenever the objective would increase.
pub fn ctl_prox_alternating(
    signals: &[Vec<f64>],
    num_filters: usize,
    filter_len: usize,
    hyper: &CtlHyper,
    iters: usize,
    step: f64,
    seed: u64,
) -> Result<CtlSolution> {
    hyper.validate()?;
    if iters == 0 {
        return Err(Error::Config("iters must be at least 1".into()));
    }
    if signals.is_empty() {
        return Err(Error::Data("no signals".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let circulants = signals
        .iter()
        .map(|s| toeplitz_from_signal(s, filter_len))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = FilterBank::random(filter_len, num_filters, &mut rng).taps;
    let mut step = step;

    let smooth = |t: &Matrix, xs: &[Matrix]| -> Result<f64> {
        let mut data = 0.0;
        for (s, x) in circulants.iter().zip(xs) {
            data += s.matmul(t)?.sub(x)?.frobenius_sq();
        }
        Ok(0.5 * data + transform_penalty(t, hyper.mu, hyper.lambda)?)
    };
    let exact_features = |t: &Matrix| -> Result<Vec<Matrix>> {
        circulants.iter().map(|s| Ok(prox_nonneg(&s.matmul(t)?))).collect()
    };

    let mut trace = Vec::with_capacity(iters);
    let mut features = exact_features(&taps)?;
    for it in 0..iters {
        let current = smooth(&taps, &features).map_err(|e| relabel(e, it))?;

        let mut grad = taps.scaled(2.0 * hyper.mu);
        for (s, x) in circulants.iter().zip(&features) {
            let resid = s.matmul(&taps)?.sub(x)?;
            grad.axpy(1.0, &s.transpose().matmul(&resid)?)?;
        }
        if hyper.lambda != 0.0 {
            let (_, g) = logdet_with_grad(&taps).map_err(|e| relabel(e, it))?;
            grad.axpy(-hyper.lambda, &g)?;
        }

        let entry_step = step;
        let mut accepted = false;
        let mut last_err = None;
        for _ in 0..MAX_HALVINGS {
            let mut candidate = taps.clone();
            candidate.axpy(-step, &grad)?;
            match smooth(&candidate, &features) {
                Ok(v) if v <= current => {
                    taps = candidate;
                    accepted = true;
                    break;
                }
                Ok(_) => {}
                Err(e @ Error::RankDeficient { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        if !accepted {
            if let Some(e) = last_err {
                return Err(relabel(e, it));
            }
            // no descent at any step size: stationary to working precision
            step = entry_step;
        }

        features = exact_features(&taps)?;
        let bank = FilterBank::new(taps.clone());
        trace.push(ctl_objective(&bank, &features, signals, hyper).map_err(|e| relabel(e, it))?);
    }

    Ok(CtlSolution {
        bank: FilterBank::new(taps),
        features,
        trace,
        final_step: step,
    })
}

fn relabel(e: Error, iteration: usize) -> Error {
    match e {
        Error::RankDeficient { sigma_min, .. } => Error::RankDeficient {
            what: format!("filter bank at iteration {iteration}"),
            sigma_min,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{circular_conv1d, sigma_min};

    fn random_signals(k: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn identity_kernel_relu_features() {
        let bank = FilterBank::new(Matrix::column(&[1.0]));
        let x = ctl_features(&bank, &[1.0, -1.0, 2.0, -2.0], Activation::Relu).unwrap();
        assert_eq!(x.shape(), (4, 1));
        assert_eq!(x.as_slice(), &[1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_signal_gives_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bank = FilterBank::random(3, 4, &mut rng);
        for act in [Activation::Relu, Activation::Tanh] {
            let x = ctl_features(&bank, &[0.0; 8], act).unwrap();
            assert_eq!(x.shape(), (8, 4));
            assert!(x.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn features_compose_conv_then_activation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bank = FilterBank::random(5, 3, &mut rng);
        let s = &random_signals(1, 12, 9)[0];
        for act in Activation::ALL {
            let x = ctl_features(&bank, s, act).unwrap();
            for m in 0..3 {
                let conv = circular_conv1d(s, &bank.taps.col(m)).unwrap();
                for (i, c) in conv.iter().enumerate() {
                    assert!((x[(i, m)] - act.eval(*c)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn objective_zero_at_exact_nonneg_fit() {
        let bank = FilterBank::new(Matrix::column(&[1.0]));
        let signals = vec![vec![1.0, 2.0, 0.5]];
        let features = vec![bank.responses(&signals[0]).unwrap()];
        let hyper = CtlHyper {
            mu: 0.0,
            lambda: 0.0,
            activation: Activation::Relu,
        };
        assert_eq!(ctl_objective(&bank, &features, &signals, &hyper).unwrap(), 0.0);
        let mut bad = features.clone();
        bad[0][(1, 0)] = -0.1;
        assert_eq!(ctl_objective(&bank, &bad, &signals, &hyper).unwrap(), f64::INFINITY);
    }

    #[test]
    fn objective_term_by_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let bank = FilterBank::random(3, 2, &mut rng);
        let signals = random_signals(3, 6, 22);
        let features: Vec<Matrix> = (0..3).map(|_| Matrix::random_uniform(6, 2, 1.0, &mut rng).map(f64::abs)).collect();
        let hyper = CtlHyper {
            mu: 0.3,
            lambda: 0.7,
            activation: Activation::Relu,
        };
        // scalar loops, determinant of the 2x2 Gram matrix by hand
        let t = &bank.taps;
        let mut data = 0.0;
        for (s, x) in signals.iter().zip(&features) {
            for m in 0..2 {
                for i in 0..6 {
                    let mut conv = 0.0;
                    for j in 0..3 {
                        conv += t[(j, m)] * s[(i + 6 + 1 - j) % 6];
                    }
                    data += (conv - x[(i, m)]).powi(2);
                }
            }
        }
        let mut gram = [[0.0; 2]; 2];
        let mut fro = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for j in 0..3 {
                    gram[a][b] += t[(j, a)] * t[(j, b)];
                }
            }
            for j in 0..3 {
                fro += t[(j, a)] * t[(j, a)];
            }
        }
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        let expected = 0.5 * data + 0.3 * fro - 0.7 * 0.5 * det.ln();
        let got = ctl_objective(&bank, &features, &signals, &hyper).unwrap();
        assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn single_tap_reaches_fixed_point() {
        let hyper = CtlHyper {
            mu: 0.0,
            lambda: 0.0,
            activation: Activation::Relu,
        };
        let signals = vec![vec![1.0, 0.0, 0.0, 0.0]];
        let sol = ctl_prox_alternating(&signals, 1, 1, &hyper, 50, 0.5, 0).unwrap();
        let sx = sol.bank.responses(&signals[0]).unwrap();
        let fixed = prox_nonneg(&sx);
        assert!(sol.features[0].sub(&fixed).unwrap().max_abs() < 1e-12);
        assert!(*sol.trace.last().unwrap() < 1e-12);
    }

    #[test]
    fn trace_strictly_decreases() {
        let signals = random_signals(4, 8, 0);
        let hyper = CtlHyper {
            mu: 1e-2,
            lambda: 0.1,
            activation: Activation::Relu,
        };
        let sol = ctl_prox_alternating(&signals, 2, 3, &hyper, 20, 0.1, 0).unwrap();
        for w in sol.trace.windows(2) {
            assert!(w[1] < w[0], "{:?}", sol.trace);
        }
    }

    #[test]
    fn log_det_prevents_collapse() {
        // without the log-det term the trivial filter T = 0 is optimal
        let signals = random_signals(4, 8, 1);
        let run = |lambda: f64| {
            let hyper = CtlHyper {
                mu: 1.0,
                lambda,
                activation: Activation::Relu,
            };
            ctl_prox_alternating(&signals, 2, 3, &hyper, 200, 0.5, 4).unwrap()
        };
        assert!(run(0.0).bank.taps.frobenius() < 1e-3);
        let kept = run(0.1);
        assert!(sigma_min(&kept.bank.taps).unwrap() > 0.1);
    }

    #[test]
    fn rejects_zero_iterations() {
        let hyper = CtlHyper {
            mu: 0.0,
            lambda: 0.0,
            activation: Activation::Relu,
        };
        assert!(ctl_prox_alternating(&[vec![1.0; 4]], 1, 1, &hyper, 0, 0.1, 0).is_err());
    }
}
