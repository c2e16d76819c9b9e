//! Element-wise activations and the positive-orthant proximity operator.
//!
//! With fixed filters the feature subproblem
//! `min_X ½‖S·T − X‖² + Ψ(X)` is solved by `X = prox_Ψ(S·T)`; for `Ψ = ι₊`
//! that prox is ReLU. The other kinds are used only through their forward map
//! and derivative.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::Matrix;

pub const SELU_SCALE: f64 = 1.0507009873554805;
pub const SELU_ALPHA: f64 = 1.6732632423543772;

pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Learnable slopes are kept inside this closed interval.
pub const SLOPE_BOUNDS: (f64, f64) = (1e-4, 1.0 - 1e-4);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "lowercase")]
pub enum Activation {
    Selu,
    Relu,
    Prelu { slope: f64 },
    #[serde(rename = "leakyrelu")]
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    /// Linear pass-through; not one of the stock configurations, used for
    /// least-squares sanity runs.
    Identity,
}

impl Activation {
    /// The six kinds evaluated on the stock pipeline, with default slopes.
    pub const ALL: [Activation; 6] = [
        Activation::Selu,
        Activation::Relu,
        Activation::Prelu {
            slope: DEFAULT_PRELU_SLOPE,
        },
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        },
        Activation::Tanh,
        Activation::Sigmoid,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Selu => "selu",
            Activation::Relu => "relu",
            Activation::Prelu { .. } => "prelu",
            Activation::LeakyRelu { .. } => "leakyrelu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match *self {
            Activation::Prelu { slope } | Activation::LeakyRelu { slope } => Some(slope),
            _ => None,
        }
    }

    /// Whether the slope is a trainable parameter.
    pub fn has_learnable_slope(&self) -> bool {
        matches!(self, Activation::Prelu { .. })
    }

    pub fn with_slope(self, slope: f64) -> Self {
        match self {
            Activation::Prelu { .. } => Activation::Prelu { slope },
            Activation::LeakyRelu { .. } => Activation::LeakyRelu { slope },
            other => other,
        }
    }

    /// True where the derivative jumps (the origin for the piecewise kinds).
    pub fn has_kink_at_zero(&self) -> bool {
        matches!(
            self,
            Activation::Selu | Activation::Relu | Activation::Prelu { .. } | Activation::LeakyRelu { .. }
        )
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let Some(s) = self.slope() {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Config(format!(
                    "{} slope must lie in (0, 1), got {s}",
                    self.tag()
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_SCALE * x
                } else {
                    SELU_SCALE * SELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Prelu { slope } | Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// dΦ/dx; the right derivative at the origin for the piecewise kinds.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Activation::Selu => {
                if x >= 0.0 {
                    SELU_SCALE
                } else {
                    SELU_SCALE * SELU_ALPHA * x.exp()
                }
            }
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Prelu { slope } | Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    /// dΦ/d(slope); zero for kinds without a slope.
    #[inline]
    pub fn slope_deriv(&self, x: f64) -> f64 {
        match self {
            Activation::Prelu { .. } | Activation::LeakyRelu { .. } if x < 0.0 => x,
            _ => 0.0,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        x.map(|v| self.eval(v))
    }

    pub fn derivative(&self, x: &Matrix) -> Matrix {
        x.map(|v| self.deriv(v))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "selu" => Ok(Activation::Selu),
            "relu" => Ok(Activation::Relu),
            "prelu" => Ok(Activation::Prelu {
                slope: DEFAULT_PRELU_SLOPE,
            }),
            "leakyrelu" | "leaky_relu" | "leaky-relu" => Ok(Activation::LeakyRelu {
                slope: DEFAULT_LEAKY_SLOPE,
            }),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Projection onto the non-negative orthant, i.e. the prox of `ι₊`.
pub fn prox_nonneg(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// In-place [`prox_nonneg`] on a slice.
pub fn project_nonneg(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
