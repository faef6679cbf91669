//! Kernel backprojection support.
//!
//! The network's first layer sees normalized kernel vectors `k_i ∈ ℝⁿ`
//! instead of raw points, so its weight matrix (`n x d_1`) holds the
//! representation coefficients of each projection direction over the pulled
//! training data. The feature map itself is never materialized.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Linear,
    /// `exp(-γ ‖a − b‖²)`.
    Rbf { gamma: f64 },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf { .. } => "rbf",
        }
    }

    /// RBF with the default bandwidth `γ = 1/d`.
    pub fn rbf_for_dim(d: usize) -> Self {
        KernelKind::Rbf {
            gamma: 1.0 / d.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::Rbf { gamma } if !(gamma > 0.0) || !gamma.is_finite() => {
                Err(Error::Config("rbf gamma must be positive and finite"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelKind::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                libm::exp(-gamma * sq)
            }
        }
    }
}

fn columns(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.column(j)).collect()
}

/// `K(i, j) = k(a_i, b_j)` over the columns of `a` (`d x n₁`) and `b` (`d x n₂`).
pub fn kernel_matrix(kind: &KernelKind, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kind.validate()?;
    if a.rows() != b.rows() {
        return Err(Error::Shape {
            context: "kernel operands",
            expected: (a.rows(), b.cols()),
            found: b.shape(),
        });
    }
    let ac = columns(a);
    let bc = columns(b);
    Ok(Matrix::from_fn(a.cols(), b.cols(), |i, j| kind.eval(&ac[i], &bc[j])))
}

/// `K̃(i, j) = K(i, j) / sqrt(K(i, i) K(j, j))`, with an exact unit diagonal.
pub fn normalize_kernel(k: &Matrix) -> Result<Matrix> {
    if k.rows() != k.cols() {
        return Err(Error::Shape {
            context: "kernel normalization",
            expected: (k.rows(), k.rows()),
            found: k.shape(),
        });
    }
    let diag = positive_diagonal(k)?;
    let n = k.rows();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            k[(i, j)] / libm::sqrt(diag[i] * diag[j])
        }
    }))
}

fn positive_diagonal(k: &Matrix) -> Result<Vec<f64>> {
    (0..k.rows())
        .map(|i| {
            let v = k[(i, i)];
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonPositiveDiagonal { index: i, value: v })
            }
        })
        .collect()
}

/// Training-set snapshot with its normalized kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    kind: KernelKind,
    train_x: Matrix,
    normalized: Matrix,
    /// Raw self-similarities `k(x_i, x_i)`.
    self_similarity: Vec<f64>,
}

impl KernelModel {
    pub fn build(kind: KernelKind, train_x: Matrix) -> Result<Self> {
        if train_x.cols() == 0 {
            return Err(Error::Config("kernel model needs at least one training point"));
        }
        let raw = kernel_matrix(&kind, &train_x, &train_x)?;
        let normalized = normalize_kernel(&raw)?;
        let self_similarity = positive_diagonal(&raw)?;
        Ok(Self {
            kind,
            train_x,
            normalized,
            self_similarity,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn train_x(&self) -> &Matrix {
        &self.train_x
    }

    /// `n x n`; column `i` is the network input for training point `i`.
    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    /// Network input dimensionality, i.e. the training-set size.
    pub fn input_dim(&self) -> usize {
        self.train_x.cols()
    }

    pub fn data_dim(&self) -> usize {
        self.train_x.rows()
    }

    /// Normalizes the `(n+1) x (n+1)` kernel over `[X̆, x_t]` and returns the
    /// train-versus-test block of its last column.
    pub fn test_kernel_vector(&self, x_t: &[f64]) -> Result<Vec<f64>> {
        if x_t.len() != self.data_dim() {
            return Err(Error::Shape {
                context: "test point",
                expected: (self.data_dim(), 1),
                found: (x_t.len(), 1),
            });
        }
        let n = self.input_dim();
        let mut joint = Matrix::zeros(self.data_dim(), n + 1);
        for i in 0..self.data_dim() {
            for j in 0..n {
                joint[(i, j)] = self.train_x[(i, j)];
            }
            joint[(i, n)] = x_t[i];
        }
        let k = normalize_kernel(&kernel_matrix(&self.kind, &joint, &joint)?)?;
        Ok((0..n).map(|i| k[(i, n)]).collect())
    }

    /// Test kernel vectors for every column of `x_test` (`d x m`), as an `n x m`
    /// network input. Reuses the cached training self-similarities, which is
    /// what the joint normalization computes for the training block.
    pub fn test_kernel_matrix(&self, x_test: &Matrix) -> Result<Matrix> {
        if x_test.rows() != self.data_dim() {
            return Err(Error::Shape {
                context: "test points",
                expected: (self.data_dim(), x_test.cols()),
                found: x_test.shape(),
            });
        }
        let cross = kernel_matrix(&self.kind, &self.train_x, x_test)?;
        let mut out = Matrix::zeros(self.input_dim(), x_test.cols());
        for j in 0..x_test.cols() {
            let col = x_test.column(j);
            let own = self.kind.eval(&col, &col);
            if !(own > 0.0) || !own.is_finite() {
                return Err(Error::NonPositiveDiagonal {
                    index: self.input_dim(),
                    value: own,
                });
            }
            for i in 0..self.input_dim() {
                out[(i, j)] = cross[(i, j)] / libm::sqrt(self.self_similarity[i] * own);
            }
        }
        Ok(out)
    }
}
