use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// SELU `alpha`, from the self-normalizing network derivation.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
/// SELU output scale (`lambda`).
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
/// Negative-side slope of the leaky rectifier.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Elementwise nonlinearity applied after each dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Selu,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    /// The kinds usable as hidden-layer activations in ablations.
    pub const HIDDEN_KINDS: [Activation; 5] = [
        Activation::Selu,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Tanh,
        Activation::Sigmoid,
    ];

    /// Evaluates the activation without validating the input.
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_SCALE * x
                } else {
                    SELU_SCALE * SELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the pre-activation. At the kink of the
    /// piecewise kinds the left branch is used.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_SCALE
                } else {
                    SELU_SCALE * SELU_ALPHA * x.exp()
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }

    /// True for kinds with a derivative discontinuity at zero.
    pub fn has_kink(self) -> bool {
        matches!(
            self,
            Activation::Selu | Activation::Relu | Activation::LeakyRelu
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Selu => "selu",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "selu" => Ok(Activation::Selu),
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" | "identity" => Ok(Activation::Linear),
            _ => Err(NumericsError::UnknownActivation(s.to_string())),
        }
    }
}

/// Applies `kind` to a single finite value.
pub fn activation_apply(kind: Activation, x: f64) -> Result<f64, NumericsError> {
    if !x.is_finite() {
        return Err(NumericsError::NonFinite {
            what: "activation input",
        });
    }
    Ok(kind.eval(x))
}
