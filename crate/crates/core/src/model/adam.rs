//! Adam with decoupled weight decay and projection of the codes.

use crate::activations::{project_nonneg, SLOPE_BOUNDS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::train::TrainConfig;
use super::{ConFuseModel, JointGrad};

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One bias-corrected Adam update of `params` at step `t` (1-based).
    fn update(&mut self, params: &mut [f64], grads: &[f64], t: u64, lr: f64, cfg: &TrainConfig) {
        let c1 = 1.0 - cfg.beta1.powf(t as f64);
        let c2 = 1.0 - cfg.beta2.powf(t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
}

/// Optimizer state. Codes have per-row moments and step counters, since a
/// row only moves when its sample is in the batch.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    banks: Vec<Moments>,
    fusion: Moments,
    slope: Moments,
    z: Vec<Moments>,
    z_steps: Vec<u64>,
}

impl AdamState {
    pub fn new(model: &ConFuseModel) -> Self {
        AdamState {
            step: 0,
            banks: model
                .banks
                .iter()
                .map(|b| Moments::zeros(b.taps.as_slice().len()))
                .collect(),
            fusion: Moments::zeros(model.fusion.as_slice().len()),
            slope: Moments::zeros(1),
            z: (0..model.z_train.rows())
                .map(|_| Moments::zeros(model.z_train.cols()))
                .collect(),
            z_steps: vec![0; model.z_train.rows()],
        }
    }

    /// Number of updates row `k` of the codes has received.
    pub fn code_steps(&self, k: usize) -> u64 {
        self.z_steps[k]
    }
}

fn decay(m: &mut Matrix, factor: f64) {
    if factor != 1.0 {
        for x in m.as_mut_slice() {
            *x *= factor;
        }
    }
}

/// Adam step on every parameter block in `grads`, then `z_k ← max(z_k, 0)`
/// for the touched code rows. Weight decay is applied to the transforms only,
/// as `θ ← θ − lr·wd·θ` before the moment update.
pub fn adam_project_step(
    model: &mut ConFuseModel,
    grads: &JointGrad,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.banks.len() != model.banks.len()
        || grads.fusion.shape() != model.fusion.shape()
        || state.z.len() != model.z_train.rows()
    {
        return Err(Error::dim("gradient or optimizer state does not match the model"));
    }
    state.step += 1;
    let t = state.step;
    let lr = cfg.lr;
    let keep = 1.0 - lr * cfg.weight_decay;

    for ((bank, g), mom) in model.banks.iter_mut().zip(&grads.banks).zip(&mut state.banks) {
        if g.shape() != bank.taps.shape() {
            return Err(Error::dim("bank gradient shape"));
        }
        decay(&mut bank.taps, keep);
        mom.update(bank.taps.as_mut_slice(), g.as_slice(), t, lr, cfg);
    }
    decay(&mut model.fusion, keep);
    state
        .fusion
        .update(model.fusion.as_mut_slice(), grads.fusion.as_slice(), t, lr, cfg);

    if let (Some(ds), Some(slope)) = (grads.slope, model.activation.slope()) {
        if cfg.train_slope && model.activation.has_learnable_slope() {
            let mut s = [slope];
            state.slope.update(&mut s, &[ds], t, lr, cfg);
            let s = s[0].clamp(SLOPE_BOUNDS.0, SLOPE_BOUNDS.1);
            model.activation = model.activation.with_slope(s);
            model.hyper.activation = model.activation;
        }
    }

    for (k, g) in &grads.z_rows {
        let k = *k;
        if g.len() != model.z_train.cols() {
            return Err(Error::dim("code gradient length"));
        }
        state.z_steps[k] += 1;
        let row = model.z_train.row_mut(k);
        state.z[k].update(row, g, state.z_steps[k], lr, cfg);
        project_nonneg(row);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use crate::ctl::CtlHyper;
    use crate::model::{ConFuseModel, Dims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> ConFuseModel {
        let dims = Dims {
            channels: 2,
            window: 4,
            filters: 2,
            filter_len: 2,
            fused: 3,
        };
        let hyper = CtlHyper {
            mu: 0.0,
            lambda: 0.0,
            activation: Activation::Prelu { slope: 0.25 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = ConFuseModel::init(dims, hyper, &mut rng).unwrap();
        m.z_train = Matrix::from_fn(4, 3, |i, j| (i + j) as f64 * 0.1);
        m
    }

    fn grads_like(m: &ConFuseModel, value: f64) -> JointGrad {
        JointGrad {
            banks: m.banks.iter().map(|b| b.taps.map(|_| value)).collect(),
            fusion: m.fusion.map(|_| value),
            z_rows: vec![(1, vec![value; 3]), (3, vec![value; 3])],
            slope: Some(value),
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_a_no_op() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let g = grads_like(&m, 0.0);
        adam_project_step(&mut m, &g, &mut st, &cfg).unwrap();
        assert_eq!(m, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        let cfg = TrainConfig {
            weight_decay: 0.0,
            lr: 1e-3,
            ..Default::default()
        };
        let mut g = grads_like(&m, 0.0);
        g.fusion = m.fusion.map(|x| if x > 0.0 { 2.5 } else { -0.3 });
        adam_project_step(&mut m, &g, &mut st, &cfg).unwrap();
        for ((a, b), gi) in m.fusion.as_slice().iter().zip(before.fusion.as_slice()).zip(g.fusion.as_slice()) {
            let expected = -cfg.lr * gi / (gi.abs() + cfg.eps_adam);
            assert!(((a - b) - expected).abs() < 1e-15);
            assert!(((a - b).abs() - cfg.lr).abs() < 1e-10);
        }
    }

    #[test]
    fn codes_stay_non_negative_and_untouched_rows_fixed() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        let cfg = TrainConfig {
            lr: 0.5,
            ..Default::default()
        };
        for _ in 0..10 {
            let g = grads_like(&m, 1.0);
            adam_project_step(&mut m, &g, &mut st, &cfg).unwrap();
            assert!(m.z_train.as_slice().iter().all(|&v| v >= 0.0));
        }
        assert_eq!(m.z_train.row(0), before.z_train.row(0));
        assert_eq!(m.z_train.row(2), before.z_train.row(2));
        assert_eq!(m.z_train.row(1), &[0.0; 3]);
        assert_eq!(st.code_steps(1), 10);
        assert_eq!(st.code_steps(0), 0);
        // slope is driven down and held inside its bounds
        assert_eq!(m.activation.slope(), Some(SLOPE_BOUNDS.0));
    }

    #[test]
    fn weight_decay_skips_codes() {
        let mut m = tiny_model();
        let before = m.clone();
        let mut st = AdamState::new(&m);
        let cfg = TrainConfig {
            weight_decay: 0.1,
            lr: 0.1,
            ..Default::default()
        };
        let mut g = grads_like(&m, 0.0);
        g.z_rows.clear();
        adam_project_step(&mut m, &g, &mut st, &cfg).unwrap();
        assert_eq!(m.z_train, before.z_train);
        let ratio = m.fusion[(0, 0)] / before.fusion[(0, 0)];
        assert!((ratio - 0.99).abs() < 1e-12);
    }

    #[test]
    fn frozen_slope_is_kept() {
        let mut m = tiny_model();
        let mut st = AdamState::new(&m);
        let cfg = TrainConfig {
            train_slope: false,
            ..Default::default()
        };
        let g = grads_like(&m, 1.0);
        adam_project_step(&mut m, &g, &mut st, &cfg).unwrap();
        assert_eq!(m.activation.slope(), Some(0.25));
    }
}
