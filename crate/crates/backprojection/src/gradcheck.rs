//! Random-instance check of the per-layer gradient against a central-difference
//! stencil and the literal Kronecker evaluation.

use backprojection_core::gradient::{
    finite_difference_gradient, kronecker_layer_gradient, layer_gradient, relative_error, Batch,
};
use backprojection_core::{ActivationKind, LayerShape, LossKind, Matrix, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{AppError, AppResult};

/// Largest layer width the Kronecker oracle is run on.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSpec {
    /// Input dimension followed by each layer's width.
    pub dims: Vec<usize>,
    /// One per layer, or a single entry applied to every layer.
    pub activations: Vec<ActivationKind>,
    /// Same convention as `activations`.
    pub losses: Vec<LossKind>,
    pub trials: usize,
    pub tolerance: f64,
    pub batch_size: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckSpec {
    fn default() -> Self {
        Self {
            dims: vec![3, 4, 2],
            activations: vec![ActivationKind::Elu, ActivationKind::Sigmoid],
            losses: vec![LossKind::Mse],
            trials: 100,
            tolerance: 1e-4,
            batch_size: 8,
            step: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    pub layers_checked: usize,
    pub max_fd_relative_error: f64,
    pub max_kronecker_relative_error: f64,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn per_layer<T: Copy>(values: &[T], n: usize, what: &str) -> AppResult<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(AppError::config(format!("expected 1 or {n} {what}, got {len}"))),
    }
}

impl GradcheckSpec {
    pub fn shapes(&self) -> AppResult<Vec<LayerShape>> {
        if self.dims.len() < 2 {
            return Err(AppError::config("dims needs an input dimension and at least one layer"));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d == 0 || d > MAX_DIM) {
            return Err(AppError::config(format!("every dim must be in 1..={MAX_DIM}, got {d}")));
        }
        if self.trials == 0 || self.batch_size == 0 {
            return Err(AppError::config("trials and batch size must be positive"));
        }
        if !(self.step > 0.0) || !(self.tolerance >= 0.0) {
            return Err(AppError::config("step must be positive and tolerance non-negative"));
        }
        let n = self.dims.len() - 1;
        let acts = per_layer(&self.activations, n, "activations")?;
        let losses = per_layer(&self.losses, n, "losses")?;
        Ok((0..n).map(|i| LayerShape::new(self.dims[i + 1], acts[i], losses[i])).collect())
    }
}

/// Target inside the activation's range, so the layer problem is well posed.
fn feasible_target(rng: &mut ChaCha8Rng, activation: ActivationKind) -> f64 {
    match activation {
        ActivationKind::Sigmoid => rng.random_range(0.05..0.95),
        ActivationKind::Tanh => rng.random_range(-0.95..0.95),
        ActivationKind::Elu => rng.random_range(-0.9..2.0),
        ActivationKind::Linear => rng.random_range(-2.0..2.0),
    }
}

/// A seeded network and batch for one trial.
pub fn random_instance(shapes: &[LayerShape], input_dim: usize, batch_size: usize, seed: u64) -> AppResult<(Network, Batch)> {
    let net = Network::random(input_dim, shapes, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let x = Matrix::from_fn(input_dim, batch_size, |_, _| rng.random_range(-2.0..2.0));
    let last = shapes.last().expect("validated non-empty");
    let y = Matrix::from_fn(last.units, batch_size, |_, _| feasible_target(&mut rng, last.activation));
    Ok((net, Batch::new(x, y)?))
}

/// Runs every trial and layer; passes when the worst relative error is strictly below the tolerance.
pub fn gradcheck(spec: &GradcheckSpec) -> AppResult<GradcheckReport> {
    let shapes = spec.shapes()?;
    let mut max_fd: f64 = 0.0;
    let mut max_kron: f64 = 0.0;
    let mut layers_checked = 0;
    for trial in 0..spec.trials {
        let seed = spec.seed.wrapping_add(trial as u64);
        let (net, batch) = random_instance(&shapes, spec.dims[0], spec.batch_size, seed)?;
        for m in 1..=net.n_layers() {
            let g = layer_gradient(&net, &batch, m)?;
            let fd = finite_difference_gradient(&net, &batch, m, spec.step)?;
            let kron = kronecker_layer_gradient(&net, &batch, m)?;
            max_fd = max_fd.max(relative_error(&g, &fd));
            max_kron = max_kron.max(relative_error(&g, &kron));
            layers_checked += 1;
        }
    }
    let max_relative_error = max_fd.max(max_kron);
    Ok(GradcheckReport {
        trials: spec.trials,
        layers_checked,
        max_fd_relative_error: max_fd,
        max_kronecker_relative_error: max_kron,
        max_relative_error,
        tolerance: spec.tolerance,
        pass: max_relative_error < spec.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_mse_net_is_nearly_exact() {
        let spec = GradcheckSpec {
            dims: vec![2, 3, 2],
            activations: vec![ActivationKind::Linear],
            losses: vec![LossKind::Mse],
            trials: 10,
            tolerance: 1e-8,
            ..GradcheckSpec::default()
        };
        let report = gradcheck(&spec).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.layers_checked, 20);
    }

    #[test]
    fn mixed_net_passes_default_tolerance() {
        let report = gradcheck(&GradcheckSpec::default()).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_kronecker_relative_error < 1e-12);
    }

    #[test]
    fn zero_tolerance_always_fails() {
        let spec = GradcheckSpec {
            tolerance: 0.0,
            trials: 3,
            ..GradcheckSpec::default()
        };
        let report = gradcheck(&spec).unwrap();
        assert!(!report.pass);
        assert!(report.max_fd_relative_error > 0.0);
    }

    #[test]
    fn rejects_oversized_or_mismatched_specs() {
        for spec in [
            GradcheckSpec {
                dims: vec![9, 2],
                ..GradcheckSpec::default()
            },
            GradcheckSpec {
                activations: vec![ActivationKind::Elu; 3],
                ..GradcheckSpec::default()
            },
            GradcheckSpec {
                losses: vec![LossKind::CrossEntropy],
                ..GradcheckSpec::default()
            },
            GradcheckSpec {
                dims: vec![3],
                ..GradcheckSpec::default()
            },
        ] {
            assert_eq!(gradcheck(&spec).unwrap_err().exit_code(), 2, "{spec:?}");
        }
    }
}
