//! Per-sample losses and their gradients with respect to the activation output.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Squared Euclidean norm of the residual.
    Mse,
    /// `-Σ y_j ln f_j`, evaluated on the activation output directly.
    CrossEntropy,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Mse, LossKind::CrossEntropy];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        }
    }

    pub fn value(self, f: &[f64], y: &[f64]) -> Result<f64> {
        self.check(f, y)?;
        Ok(f.iter().zip(y).map(|(&a, &b)| self.value_entry(a, b)).sum())
    }

    pub fn grad(self, f: &[f64], y: &[f64]) -> Result<alloc::vec::Vec<f64>> {
        self.check(f, y)?;
        Ok(f.iter().zip(y).map(|(&a, &b)| self.grad_entry(a, b)).collect())
    }

    #[inline]
    pub(crate) fn value_entry(self, f: f64, y: f64) -> f64 {
        match self {
            LossKind::Mse => (f - y) * (f - y),
            LossKind::CrossEntropy => {
                if y == 0.0 {
                    0.0
                } else {
                    -y * libm::log(f)
                }
            }
        }
    }

    #[inline]
    pub(crate) fn grad_entry(self, f: f64, y: f64) -> f64 {
        match self {
            LossKind::Mse => 2.0 * (f - y),
            LossKind::CrossEntropy => {
                if y == 0.0 {
                    0.0
                } else {
                    -y / f
                }
            }
        }
    }

    fn check(self, f: &[f64], y: &[f64]) -> Result<()> {
        if f.len() != y.len() {
            return Err(Error::Shape {
                context: "loss operands",
                expected: (y.len(), 1),
                found: (f.len(), 1),
            });
        }
        if self == LossKind::CrossEntropy {
            if let Some((index, &value)) = f.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(Error::NonPositiveActivation { index, value });
            }
        }
        Ok(())
    }

    /// Sum of per-column losses for column-wise sample matrices.
    pub fn total(self, f: &Matrix, y: &Matrix) -> Result<f64> {
        check_same_shape(f, y)?;
        self.value(f.as_slice(), y.as_slice())
    }

    /// Elementwise gradient for column-wise sample matrices.
    pub fn grad_matrix(self, f: &Matrix, y: &Matrix) -> Result<Matrix> {
        check_same_shape(f, y)?;
        let g = self.grad(f.as_slice(), y.as_slice())?;
        Matrix::from_row_major(f.rows(), f.cols(), g)
    }
}

fn check_same_shape(f: &Matrix, y: &Matrix) -> Result<()> {
    if f.shape() != y.shape() {
        return Err(Error::Shape {
            context: "loss operands",
            expected: y.shape(),
            found: f.shape(),
        });
    }
    Ok(())
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            _ => Err(Error::Config("unknown loss (expected mse or cross_entropy)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn value_examples() {
        assert_eq!(LossKind::Mse.value(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(LossKind::Mse.value(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        let ce = LossKind::CrossEntropy.value(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((ce - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn grad_examples() {
        assert_eq!(LossKind::Mse.grad(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(LossKind::Mse.grad(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let g = LossKind::CrossEntropy.grad(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(g, vec![-2.0, 0.0]);
        assert!(g[1].is_sign_positive());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            LossKind::Mse.value(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
        assert_eq!(
            LossKind::CrossEntropy.grad(&[0.5, 0.0], &[1.0, 0.0]),
            Err(Error::NonPositiveActivation { index: 1, value: 0.0 })
        );
        assert!(LossKind::CrossEntropy.value(&[-0.1], &[1.0]).is_err());
    }

    #[test]
    fn names() {
        for kind in LossKind::ALL {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
