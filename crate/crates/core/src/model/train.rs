use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_project_step, AdamState, ConFuseModel, Dims};
use crate::activations::Activation;
use crate::ctl::CtlHyper;
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::linalg::SIGMA_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub weight_decay: f64,
    pub mu: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Train the PReLU slope jointly; ignored for other activations.
    pub train_slope: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            weight_decay: 5e-5,
            mu: 1e-4,
            lambda: 1e-2,
            seed: 0,
            train_slope: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.eps_adam > 0.0) {
            return bad(format!("eps_adam must be positive, got {}", self.eps_adam));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be non-negative, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        Ok(())
    }

    pub fn hyper(&self, activation: Activation) -> CtlHyper {
        CtlHyper {
            mu: self.mu,
            lambda: self.lambda,
            activation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ConFuseModel,
    /// Full-data loss before the first epoch.
    pub initial_loss: f64,
    /// Full-data loss after each epoch.
    pub trace: Vec<f64>,
    /// Smallest singular value over all transforms after each epoch.
    pub sigma_min_trace: Vec<f64>,
}

fn at(e: Error, epoch: usize, batch: Option<usize>) -> Error {
    let place = match batch {
        Some(b) => format!("epoch {epoch}, batch {b}"),
        None => format!("epoch {epoch}"),
    };
    match e {
        Error::RankDeficient { what, sigma_min } => Error::RankDeficient {
            what: format!("{what} ({place})"),
            sigma_min,
        },
        Error::NonFinite(m) => Error::NonFinite(format!("{m} ({place})")),
        other => other,
    }
}

/// Projected stochastic Adam on the joint objective. Deterministic given
/// `cfg.seed`.
pub fn train(
    samples: &[WindowedSample],
    cfg: &TrainConfig,
    dims: Dims,
    activation: Activation,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.len() < cfg.batch_size {
        return Err(Error::Data(format!(
            "{} training samples is fewer than the batch size {}",
            samples.len(),
            cfg.batch_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ConFuseModel::init(dims, cfg.hyper(activation), &mut rng)?;
    model.warm_start_codes(samples)?;
    let enforce_rank = cfg.lambda > 0.0;
    if enforce_rank {
        model.check_full_rank()?;
    }
    let initial_loss = model.full_loss(samples)?;
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite("initial loss".into()));
    }

    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut sigma_min_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let grads = model
                .joint_grad(samples, batch)
                .map_err(|e| at(e, epoch, Some(b)))?;
            let finite = grads.fusion.is_finite()
                && grads.banks.iter().all(|g| g.is_finite())
                && grads.z_rows.iter().all(|(_, g)| g.iter().all(|v| v.is_finite()));
            if !finite {
                return Err(at(Error::NonFinite("gradient".into()), epoch, Some(b)));
            }
            adam_project_step(&mut model, &grads, &mut state, cfg)?;
        }
        let loss = model.full_loss(samples).map_err(|e| at(e, epoch, None))?;
        if !loss.is_finite() {
            return Err(at(Error::NonFinite(format!("loss {loss}")), epoch, None));
        }
        let smin = model.min_singular_value()?;
        if enforce_rank && smin <= SIGMA_FLOOR {
            model.check_full_rank().map_err(|e| at(e, epoch, None))?;
        }
        trace.push(loss);
        sigma_min_trace.push(smin);
    }
    Ok(TrainOutcome {
        model,
        initial_loss,
        trace,
        sigma_min_trace,
    })
}
