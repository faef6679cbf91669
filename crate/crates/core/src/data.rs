//! Synthetic blob datasets, standardization, and label encoding.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column-wise points with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `d x n`.
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != x.cols() {
            return Err(Error::Shape {
                context: "dataset labels",
                expected: (x.cols(), 1),
                found: (labels.len(), 1),
            });
        }
        if n_classes == 0 || x.cols() < n_classes {
            return Err(Error::Config("dataset needs at least one point per class"));
        }
        check_labels(&labels, n_classes)?;
        Ok(Self { x, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    match labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
        Some((index, &label)) => Err(Error::LabelOutOfRange {
            index,
            label,
            n_classes,
        }),
        None => Ok(()),
    }
}

/// Isotropic Gaussian blobs, one per class, emitted class by class.
pub fn generate_blobs(n_per_class: &[usize], means: &[Vec<f64>], variances: &[f64], seed: u64) -> Result<Dataset> {
    if n_per_class.len() != means.len() || means.len() != variances.len() {
        return Err(Error::Config("blob counts, means and variances must have equal lengths"));
    }
    if means.is_empty() {
        return Err(Error::Config("at least one blob is required"));
    }
    let d = means[0].len();
    if d == 0 || means.iter().any(|m| m.len() != d) {
        return Err(Error::Config("blob means must share a positive dimension"));
    }
    if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Config("blob variances must be positive"));
    }
    let n: usize = n_per_class.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for (class, ((&count, mean), &var)) in n_per_class.iter().zip(means).zip(variances).enumerate() {
        let std = libm::sqrt(var);
        for _ in 0..count {
            for (i, &mu) in mean.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[(i, col)] = mu + std * z;
            }
            labels.push(class);
            col += 1;
        }
    }
    Dataset::new(x, labels, means.len())
}

/// Two-class blobs: 150 points each at (−2, 0) and (2, 0), variances 1.0 and 2.5.
pub fn two_blobs(seed: u64) -> Dataset {
    generate_blobs(
        &[150, 150],
        &[alloc::vec![-2.0, 0.0], alloc::vec![2.0, 0.0]],
        &[1.0, 2.5],
        seed,
    )
    .expect("fixed blob parameters are valid")
}

/// Three-class blobs: 100 points each at (−2, −1), (2, −1), (0, 2), variances 0.7, 1.5, 2.5.
pub fn three_blobs(seed: u64) -> Dataset {
    generate_blobs(
        &[100, 100, 100],
        &[alloc::vec![-2.0, -1.0], alloc::vec![2.0, -1.0], alloc::vec![0.0, 2.0]],
        &[0.7, 1.5, 2.5],
        seed,
    )
    .expect("fixed blob parameters are valid")
}

/// Per-row shift and scale learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::Config("cannot standardize an empty matrix"));
        }
        let n = x.cols() as f64;
        let mut mean = Vec::with_capacity(x.rows());
        let mut std = Vec::with_capacity(x.rows());
        for (row, values) in (0..x.rows()).map(|i| (i, x.row(i))) {
            let mu = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = libm::sqrt(var);
            if !(sd > 0.0) {
                return Err(Error::ZeroVariance { row });
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.mean.len() {
            return Err(Error::Shape {
                context: "standardization",
                expected: (self.mean.len(), x.cols()),
                found: x.shape(),
            });
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.mean[i]) / self.std[i]))
    }

    pub fn apply_point(&self, point: &mut [f64]) {
        for ((v, mu), sd) in point.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - mu) / sd;
        }
    }
}

/// Zero mean, unit population standard deviation per row.
pub fn standardize(x: &Matrix) -> Result<(Matrix, Standardization)> {
    let stats = Standardization::fit(x)?;
    let out = stats.apply(x)?;
    Ok((out, stats))
}

/// Label dimensionality produced by [`encode_labels`].
pub fn label_dim(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

/// Two classes become scalar targets (`{−1, 1}` for tanh, `{0, 1}` otherwise);
/// three or more become one-hot columns.
pub fn encode_labels(labels: &[usize], n_classes: usize, last_activation: ActivationKind) -> Result<Matrix> {
    if n_classes < 2 {
        return Err(Error::Config("label encoding needs at least two classes"));
    }
    check_labels(labels, n_classes)?;
    if n_classes == 2 {
        let low = if last_activation == ActivationKind::Tanh { -1.0 } else { 0.0 };
        return Ok(Matrix::from_fn(1, labels.len(), |_, j| if labels[j] == 1 { 1.0 } else { low }));
    }
    Ok(Matrix::from_fn(n_classes, labels.len(), |i, j| if labels[j] == i { 1.0 } else { 0.0 }))
}
