//! Invertible activation functions.
//!
//! Each kind provides the forward map, its derivative, its inverse on the
//! feasible set, and the projection `Π` that clamps a target back into that
//! set before inversion. Inverse outputs are bounded to `±INVERSE_BOUND`.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Margin by which open feasible sets are shrunk before inversion.
pub const FEASIBILITY_MARGIN: f64 = 1e-6;

/// Clamp applied to every inverse output. The smallest value that keeps
/// `f⁻¹(f(z)) = z` exact on `[-5, 5]`.
pub const INVERSE_BOUND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// Exponential linear unit with unit scale.
    Elu,
    Linear,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Elu,
        ActivationKind::Linear,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Elu => "elu",
            ActivationKind::Linear => "linear",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }

    /// Open feasible interval `(lower, upper)` of the inverse.
    pub fn feasible_interval(self) -> (f64, f64) {
        match self {
            ActivationKind::Elu => (-1.0, f64::INFINITY),
            ActivationKind::Linear => (f64::NEG_INFINITY, f64::INFINITY),
            ActivationKind::Sigmoid => (0.0, 1.0),
            ActivationKind::Tanh => (-1.0, 1.0),
        }
    }

    /// Whether every output of the activation is strictly positive.
    pub fn is_positive(self) -> bool {
        matches!(self, ActivationKind::Sigmoid)
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Elu => {
                if z <= 0.0 {
                    libm::expm1(z)
                } else {
                    z
                }
            }
            ActivationKind::Linear => z,
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Tanh => libm::tanh(z),
        }
    }

    /// Derivative; ELU uses the right limit at its kink.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Elu => {
                if z < 0.0 {
                    libm::exp(z)
                } else {
                    1.0
                }
            }
            ActivationKind::Linear => 1.0,
            ActivationKind::Sigmoid => {
                let f = sigmoid(z);
                f * (1.0 - f)
            }
            ActivationKind::Tanh => {
                let f = libm::tanh(z);
                1.0 - f * f
            }
        }
    }

    /// Derivative given both the input and the already computed output `f = apply(z)`.
    #[inline]
    pub fn derivative_given(self, z: f64, f: f64) -> f64 {
        match self {
            ActivationKind::Elu => {
                if z < 0.0 {
                    f + 1.0
                } else {
                    1.0
                }
            }
            ActivationKind::Linear => 1.0,
            ActivationKind::Sigmoid => f * (1.0 - f),
            ActivationKind::Tanh => 1.0 - f * f,
        }
    }

    /// Unchecked inverse, clamped to `±INVERSE_BOUND`. Callers guarantee feasibility.
    #[inline]
    fn invert(self, y: f64) -> f64 {
        let raw = match self {
            ActivationKind::Elu => {
                if y <= 0.0 {
                    libm::log1p(y)
                } else {
                    y
                }
            }
            ActivationKind::Linear => y,
            ActivationKind::Sigmoid => libm::log(y / (1.0 - y)),
            ActivationKind::Tanh => 0.5 * libm::log((1.0 + y) / (1.0 - y)),
        };
        raw.clamp(-INVERSE_BOUND, INVERSE_BOUND)
    }

    pub fn inverse(self, y: f64) -> Result<f64> {
        self.check_feasible(0, y)?;
        Ok(self.invert(y))
    }

    fn check_feasible(self, index: usize, y: f64) -> Result<()> {
        let (lo, hi) = self.feasible_interval();
        let bound = if y <= lo {
            Some(lo)
        } else if y >= hi {
            Some(hi)
        } else if y.is_nan() {
            Some(f64::NAN)
        } else {
            None
        };
        match bound {
            Some(bound) => Err(Error::Domain {
                activation: self.name(),
                index,
                value: y,
                bound,
            }),
            None => Ok(()),
        }
    }

    /// Clamps into the feasible set shrunk by `FEASIBILITY_MARGIN`.
    #[inline]
    pub fn project(self, y: f64) -> f64 {
        match self {
            ActivationKind::Elu => y.max(-1.0 + FEASIBILITY_MARGIN),
            ActivationKind::Linear => y,
            ActivationKind::Sigmoid => y.clamp(FEASIBILITY_MARGIN, 1.0 - FEASIBILITY_MARGIN),
            ActivationKind::Tanh => y.clamp(-1.0 + FEASIBILITY_MARGIN, 1.0 - FEASIBILITY_MARGIN),
        }
    }

    pub fn forward(self, z: &Matrix) -> Matrix {
        z.map(|v| self.apply(v))
    }

    pub fn derivative_of(self, z: &Matrix) -> Matrix {
        z.map(|v| self.derivative(v))
    }

    /// Elementwise inverse. Every entry must already be feasible; the error
    /// names the first offending row-major index.
    pub fn inverse_of(self, y: &Matrix) -> Result<Matrix> {
        for (index, &v) in y.as_slice().iter().enumerate() {
            self.check_feasible(index, v)?;
        }
        Ok(y.map(|v| self.invert(v)))
    }

    pub fn project_feasible(self, y: &Matrix) -> Matrix {
        y.map(|v| self.project(v))
    }

    /// `Π` followed by the inverse; infallible because projection guarantees feasibility.
    pub(crate) fn project_and_invert(self, y: &Matrix) -> Matrix {
        y.map(|v| self.invert(self.project(v)))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(ActivationKind::Elu),
            "linear" => Ok(ActivationKind::Linear),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            _ => Err(Error::Config("unknown activation (expected elu, linear, sigmoid or tanh)")),
        }
    }
}
