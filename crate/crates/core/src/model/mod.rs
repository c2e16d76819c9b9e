//! End-to-end fusion model.
//!
//! Each channel `c` has a filter bank `T_c` (`P × M`). For a sample, the
//! channel features `Φ(S_c T_c)` (`L × M`) are flattened channel-major, then
//! by time, then by filter into a vector `x` of length `N = C·L·M`. The fusion
//! transform `T̃` (`F × N`) maps `x` to `T̃x`, which is matched against a
//! per-sample non-negative code `z` learned jointly:
//!
//! ```text
//! ½ Σ_k ‖T̃ x_k(T) − z_k‖² + μ‖T̃‖² + μ Σ_c ‖T_c‖² − λ (logdet T̃ + Σ_c logdet T_c)
//! ```
//!
//! subject to `z ≥ 0`, which is kept by projection after every optimizer step.

mod adam;
mod io;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{prox_nonneg, project_nonneg, Activation};
use crate::ctl::{CtlHyper, FilterBank};
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::linalg::{logdet_with_grad, sigma_min, toeplitz_from_signal, Matrix, SIGMA_FLOOR};

pub use adam::{adam_project_step, AdamState};
pub use io::{read_model, write_model, ModelFile, FLATTEN_CONVENTION, FORMAT_VERSION};
pub use train::{train, TrainConfig, TrainOutcome};

/// Architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// C
    pub channels: usize,
    /// L
    pub window: usize,
    /// M
    pub filters: usize,
    /// P
    pub filter_len: usize,
    /// F
    pub fused: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            channels: 5,
            window: 20,
            filters: 4,
            filter_len: 5,
            fused: 64,
        }
    }
}

impl Dims {
    /// `N = C·L·M`, the length of the stacked channel features.
    pub fn stacked_len(&self) -> usize {
        self.channels * self.window * self.filters
    }

    pub fn validate(&self) -> Result<()> {
        let Dims {
            channels,
            window,
            filters,
            filter_len,
            fused,
        } = *self;
        if channels == 0 || window == 0 || filters == 0 || filter_len == 0 || fused == 0 {
            return Err(Error::Config(format!("all dimensions must be positive: {self:?}")));
        }
        if filter_len > window {
            return Err(Error::Config(format!(
                "filter length {filter_len} exceeds window {window}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConFuseModel {
    pub dims: Dims,
    pub activation: Activation,
    pub hyper: CtlHyper,
    pub banks: Vec<FilterBank>,
    /// `F × N`
    pub fusion: Matrix,
    /// `K × F`; row `k` is the code of training sample `k`.
    pub z_train: Matrix,
}

/// Gradients of [`ConFuseModel::joint_loss`].
#[derive(Debug, Clone)]
pub struct JointGrad {
    pub banks: Vec<Matrix>,
    pub fusion: Matrix,
    /// `(sample index, gradient of its code)` in batch order.
    pub z_rows: Vec<(usize, Vec<f64>)>,
    /// Derivative with respect to the activation slope, when it has one.
    pub slope: Option<f64>,
}

/// Intermediate values of one sample's forward pass.
struct Forward {
    /// Per channel `L × M` pre-activations.
    pre: Vec<Matrix>,
    /// Per channel `L × P` circulant of the window.
    circulants: Vec<Matrix>,
    stacked: Vec<f64>,
}

impl ConFuseModel {
    /// Seeded initialization: banks as in [`FilterBank::random`], fusion
    /// uniform on `±1/√(F·N)`, and no training codes yet.
    pub fn init<R: Rng + ?Sized>(dims: Dims, hyper: CtlHyper, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        hyper.validate()?;
        let banks = (0..dims.channels)
            .map(|_| FilterBank::random(dims.filter_len, dims.filters, rng))
            .collect();
        let n = dims.stacked_len();
        let bound = 1.0 / ((dims.fused * n) as f64).sqrt();
        let fusion = Matrix::random_uniform(dims.fused, n, bound, rng);
        Ok(ConFuseModel {
            dims,
            activation: hyper.activation,
            hyper,
            banks,
            fusion,
            z_train: Matrix::zeros(0, dims.fused),
        })
    }

    fn check_windows(&self, windows: &[Vec<f64>]) -> Result<()> {
        if windows.len() != self.dims.channels {
            return Err(Error::dim(format!(
                "sample has {} channels, model expects {}",
                windows.len(),
                self.dims.channels
            )));
        }
        if let Some(w) = windows.iter().find(|w| w.len() != self.dims.window) {
            return Err(Error::dim(format!(
                "window of length {}, model expects {}",
                w.len(),
                self.dims.window
            )));
        }
        Ok(())
    }

    fn forward(&self, windows: &[Vec<f64>]) -> Result<Forward> {
        self.check_windows(windows)?;
        let mut pre = Vec::with_capacity(self.dims.channels);
        let mut circulants = Vec::with_capacity(self.dims.channels);
        let mut stacked = Vec::with_capacity(self.dims.stacked_len());
        for (bank, w) in self.banks.iter().zip(windows) {
            let s = toeplitz_from_signal(w, self.dims.filter_len)?;
            let p = s.matmul(&bank.taps)?;
            stacked.extend(p.as_slice().iter().map(|&v| self.activation.eval(v)));
            pre.push(p);
            circulants.push(s);
        }
        Ok(Forward {
            pre,
            circulants,
            stacked,
        })
    }

    /// Stacked channel features `x̂` of length `C·L·M`.
    pub fn channel_stack(&self, windows: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.forward(windows)?.stacked)
    }

    /// `T̃ · x̂` before projection.
    pub fn fused_response(&self, windows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.fusion.matvec(&self.channel_stack(windows)?)
    }

    /// Code for an unseen sample: `max(T̃ x̂, 0)`, the minimizer of the data
    /// term over `z ≥ 0`.
    pub fn extract_features(&self, windows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut z = self.fused_response(windows)?;
        project_nonneg(&mut z);
        Ok(z)
    }

    /// Sets `z_k = max(T̃ x̂_k, 0)` for every training sample.
    pub fn warm_start_codes(&mut self, samples: &[WindowedSample]) -> Result<()> {
        let f = self.dims.fused;
        let mut z = Matrix::zeros(samples.len(), f);
        for (k, s) in samples.iter().enumerate() {
            let y = Matrix::from_vec(1, f, self.fused_response(&s.windows)?)?;
            z.row_mut(k).copy_from_slice(prox_nonneg(&y).as_slice());
        }
        self.z_train = z;
        Ok(())
    }

    fn named_logdet(m: &Matrix, what: impl Fn() -> String) -> Result<(f64, Matrix)> {
        logdet_with_grad(m).map_err(|e| match e {
            Error::RankDeficient { sigma_min, .. } => Error::RankDeficient {
                what: what(),
                sigma_min,
            },
            other => other,
        })
    }

    /// Regularizer value and its gradients for (banks, fusion).
    fn penalty(&self) -> Result<(f64, Vec<Matrix>, Matrix)> {
        let CtlHyper { mu, lambda, .. } = self.hyper;
        let mut value = mu * self.fusion.frobenius_sq();
        let mut fusion_grad = self.fusion.scaled(2.0 * mu);
        let mut bank_grads = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            value += mu * bank.taps.frobenius_sq();
            bank_grads.push(bank.taps.scaled(2.0 * mu));
        }
        if lambda != 0.0 {
            let (ld, g) = Self::named_logdet(&self.fusion, || "fusion transform".into())?;
            value -= lambda * ld;
            fusion_grad.axpy(-lambda, &g)?;
            for (c, (bank, grad)) in self.banks.iter().zip(bank_grads.iter_mut()).enumerate() {
                let (ld, g) = Self::named_logdet(&bank.taps, || format!("filter bank of channel {c}"))?;
                value -= lambda * ld;
                grad.axpy(-lambda, &g)?;
            }
        }
        Ok((value, bank_grads, fusion_grad))
    }

    fn check_batch(&self, samples: &[WindowedSample], batch: &[usize]) -> Result<()> {
        if self.z_train.rows() != samples.len() {
            return Err(Error::dim(format!(
                "model holds {} codes for {} samples",
                self.z_train.rows(),
                samples.len()
            )));
        }
        if let Some(&k) = batch.iter().find(|&&k| k >= samples.len()) {
            return Err(Error::dim(format!("batch index {k} out of range")));
        }
        Ok(())
    }

    /// Joint objective over `batch` (indices into `samples` and `z_train`),
    /// with the full regularizer. Returns `+∞` if a batch code is negative.
    pub fn joint_loss(&self, samples: &[WindowedSample], batch: &[usize]) -> Result<f64> {
        self.check_batch(samples, batch)?;
        let mut data = 0.0;
        for &k in batch {
            let z = self.z_train.row(k);
            if z.iter().any(|&v| v < 0.0) {
                return Ok(f64::INFINITY);
            }
            let y = self.fused_response(&samples[k].windows)?;
            data += y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let (penalty, _, _) = self.penalty()?;
        Ok(0.5 * data + penalty)
    }

    /// Loss over every training sample.
    pub fn full_loss(&self, samples: &[WindowedSample]) -> Result<f64> {
        let all: Vec<usize> = (0..samples.len()).collect();
        self.joint_loss(samples, &all)
    }

    /// Analytic gradients of [`Self::joint_loss`] (the indicator excluded).
    pub fn joint_grad(&self, samples: &[WindowedSample], batch: &[usize]) -> Result<JointGrad> {
        self.check_batch(samples, batch)?;
        let (_, mut bank_grads, mut fusion_grad) = self.penalty()?;
        let mut z_rows = Vec::with_capacity(batch.len());
        let mut slope = self.activation.slope().map(|_| 0.0);
        let (l, m) = (self.dims.window, self.dims.filters);

        for &k in batch {
            let fwd = self.forward(&samples[k].windows)?;
            let z = self.z_train.row(k);
            let resid: Vec<f64> = self
                .fusion
                .matvec(&fwd.stacked)?
                .iter()
                .zip(z)
                .map(|(y, zk)| y - zk)
                .collect();
            fusion_grad.add_outer(1.0, &resid, &fwd.stacked);
            z_rows.push((k, resid.iter().map(|r| -r).collect()));

            let upstream = self.fusion.matvec_t(&resid)?;
            for (c, chunk) in upstream.chunks_exact(l * m).enumerate() {
                let pre = &fwd.pre[c];
                let mut local = Matrix::from_vec(l, m, chunk.to_vec())?;
                if let Some(ds) = slope.as_mut() {
                    *ds += chunk
                        .iter()
                        .zip(pre.as_slice())
                        .map(|(g, &p)| g * self.activation.slope_deriv(p))
                        .sum::<f64>();
                }
                for (g, &p) in local.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    *g *= self.activation.deriv(p);
                }
                bank_grads[c].axpy(1.0, &fwd.circulants[c].transpose().matmul(&local)?)?;
            }
        }
        Ok(JointGrad {
            banks: bank_grads,
            fusion: fusion_grad,
            z_rows,
            slope,
        })
    }

    /// Smallest singular value over the fusion transform and all banks.
    pub fn min_singular_value(&self) -> Result<f64> {
        let mut s = sigma_min(&self.fusion)?;
        for b in &self.banks {
            s = s.min(sigma_min(&b.taps)?);
        }
        Ok(s)
    }

    /// Fails with the offending transform named if any has lost rank.
    pub fn check_full_rank(&self) -> Result<()> {
        let s = sigma_min(&self.fusion)?;
        if s <= SIGMA_FLOOR {
            return Err(Error::RankDeficient {
                what: "fusion transform".into(),
                sigma_min: s,
            });
        }
        for (c, b) in self.banks.iter().enumerate() {
            let s = sigma_min(&b.taps)?;
            if s <= SIGMA_FLOOR {
                return Err(Error::RankDeficient {
                    what: format!("filter bank of channel {c}"),
                    sigma_min: s,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctl::ctl_features;
    use crate::data::{Label, WindowedSample};
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample(windows: Vec<Vec<f64>>) -> WindowedSample {
        let d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        WindowedSample {
            windows,
            target: [0.0; 5],
            label: Label::Sell,
            anchor_date: d,
            target_date: d,
        }
    }

    fn hyper(act: Activation, mu: f64, lambda: f64) -> CtlHyper {
        CtlHyper {
            mu,
            lambda,
            activation: act,
        }
    }

    fn small_dims() -> Dims {
        Dims {
            channels: 2,
            window: 8,
            filters: 2,
            filter_len: 3,
            fused: 4,
        }
    }

    #[test]
    fn single_channel_single_filter_stack() {
        let dims = Dims {
            channels: 1,
            window: 6,
            filters: 1,
            filter_len: 3,
            fused: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = ConFuseModel::init(dims, hyper(Activation::Relu, 0.0, 0.0), &mut rng).unwrap();
        let w = vec![vec![0.3, -1.0, 2.0, 0.5, -0.2, 1.1]];
        let x = m.channel_stack(&w).unwrap();
        let direct = ctl_features(&m.banks[0], &w[0], Activation::Relu).unwrap();
        assert_eq!(x, direct.into_vec());
    }

    #[test]
    fn two_channel_stack_is_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ConFuseModel::init(small_dims(), hyper(Activation::Tanh, 0.0, 0.0), &mut rng).unwrap();
        let w: Vec<Vec<f64>> = (0..2).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x = m.channel_stack(&w).unwrap();
        let mut manual = Vec::new();
        for c in 0..2 {
            // time-major within a channel: row l holds the M filter outputs
            manual.extend(ctl_features(&m.banks[c], &w[c], Activation::Tanh).unwrap().into_vec());
        }
        assert_eq!(x.len(), 32);
        for (a, b) in x.iter().zip(&manual) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_windows_give_zero_stack_and_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ConFuseModel::init(small_dims(), hyper(Activation::Relu, 0.0, 0.0), &mut rng).unwrap();
        let w = vec![vec![0.0; 8]; 2];
        assert!(m.channel_stack(&w).unwrap().iter().all(|&v| v == 0.0));
        assert!(m.extract_features(&w).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_sample_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ConFuseModel::init(small_dims(), hyper(Activation::Relu, 0.0, 0.0), &mut rng).unwrap();
        assert!(m.channel_stack(&[vec![0.0; 8]]).is_err());
        assert!(m.channel_stack(&[vec![0.0; 8], vec![0.0; 7]]).is_err());
    }

    #[test]
    fn exact_codes_zero_loss_and_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = ConFuseModel::init(small_dims(), hyper(Activation::Sigmoid, 0.0, 0.0), &mut rng).unwrap();
        let samples: Vec<_> = (0..3)
            .map(|_| sample((0..2).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()))
            .collect();
        // sigmoid features are positive; make the fusion non-negative so T̃x ≥ 0
        m.fusion = m.fusion.map(f64::abs);
        m.warm_start_codes(&samples).unwrap();
        assert!(m.full_loss(&samples).unwrap().abs() < 1e-28);
        let g = m.joint_grad(&samples, &[0, 1, 2]).unwrap();
        assert!(g.fusion.max_abs() < 1e-14);
        assert!(g.banks.iter().all(|b| b.max_abs() < 1e-14));
        assert!(g.z_rows.iter().all(|(_, r)| r.iter().all(|v| v.abs() < 1e-14)));
    }

    #[test]
    fn ridge_only_loss() {
        let dims = Dims {
            channels: 2,
            window: 4,
            filters: 2,
            filter_len: 2,
            fused: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = ConFuseModel::init(dims, hyper(Activation::Relu, 0.5, 0.0), &mut rng).unwrap();
        m.fusion = Matrix::from_diag(3, 16, &[1.0; 3]);
        for b in &mut m.banks {
            b.taps = Matrix::identity(2);
        }
        let expected = 0.5 * (3.0 + 2.0 + 2.0);
        assert!((m.full_loss(&[]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_model_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = ConFuseModel::init(small_dims(), hyper(Activation::Relu, 1e-4, 1e-2), &mut rng).unwrap();
        m.fusion = Matrix::zeros(4, 32);
        let err = m.full_loss(&[]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { ref what, .. } if what == "fusion transform"), "{err}");
        assert!(m.check_full_rank().is_err());
    }

    #[test]
    fn infeasible_code_is_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = ConFuseModel::init(small_dims(), hyper(Activation::Relu, 0.0, 0.0), &mut rng).unwrap();
        let samples = vec![sample(vec![vec![1.0; 8]; 2])];
        m.warm_start_codes(&samples).unwrap();
        m.z_train[(0, 0)] = -1.0;
        assert_eq!(m.full_loss(&samples).unwrap(), f64::INFINITY);
    }
}
