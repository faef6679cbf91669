//! Per-layer backprojection loss and its gradient with respect to `U_m`.
//!
//! The production path uses the outer-product form
//! `∂L_m/∂U_m = Σ_i x_i^{(m-1)} (g_i ⊙ f_m'(z_i))ᵀ`. The literal Kronecker
//! form and a central-difference stencil are kept alongside as oracles.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::matrix::Matrix;
use crate::network::{LayerSpec, Network};

/// Column-wise batch: `inputs` is `d x b`, `targets` is `p x b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.cols() != targets.cols() || inputs.cols() == 0 {
            return Err(Error::Shape {
                context: "batch columns",
                expected: (targets.rows(), inputs.cols()),
                found: targets.shape(),
            });
        }
        Ok(Self { inputs, targets })
    }

    pub fn size(&self) -> usize {
        self.inputs.cols()
    }
}

/// Everything a single layer update needs: its input `X^{(m-1)}` and target `Y^{(m)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProblem {
    pub input: Matrix,
    pub target: Matrix,
}

impl LayerProblem {
    /// Forwards to layer `m-1` and backprojects labels to layer `m` from the current weights.
    pub fn build(net: &Network, batch: &Batch, m: usize) -> Result<Self> {
        net.check_layer(m)?;
        let input = net.activations_at(&batch.inputs, m - 1)?;
        let target = net.backproject_labels(&batch.targets, m)?;
        Ok(Self { input, target })
    }
}

/// Fused `δ = ∂ℓ/∂f ⊙ f'(z)` and summed loss for a layer whose pre- and
/// post-activations are `z` and `f`.
pub(crate) fn output_delta(spec: &LayerSpec, z: &Matrix, f: &Matrix, target: &Matrix) -> Result<(Matrix, f64)> {
    if f.shape() != target.shape() {
        return Err(Error::Shape {
            context: "layer target",
            expected: f.shape(),
            found: target.shape(),
        });
    }
    let mut delta = Matrix::zeros(f.rows(), f.cols());
    let mut loss = 0.0;
    let entries = z.as_slice().iter().zip(f.as_slice()).zip(target.as_slice());
    for (index, (d, ((&zv, &fv), &yv))) in delta.as_mut_slice().iter_mut().zip(entries).enumerate() {
        if spec.loss == LossKind::CrossEntropy && !(fv > 0.0) {
            return Err(Error::NonPositiveActivation { index, value: fv });
        }
        loss += spec.loss.value_entry(fv, yv);
        *d = spec.loss.grad_entry(fv, yv) * spec.activation.derivative_given(zv, fv);
    }
    Ok((delta, loss))
}

/// Gradient and loss of one layer from precomputed `z = Uᵀ input` and `f = f(z)`.
pub(crate) fn layer_step_with(
    spec: &LayerSpec,
    input: &Matrix,
    z: &Matrix,
    f: &Matrix,
    target: &Matrix,
) -> Result<(Matrix, f64)> {
    let (delta, loss) = output_delta(spec, z, f, target)?;
    Ok((input.matmul_tr(&delta), loss))
}

/// Gradient and loss of one layer given its input and target.
pub(crate) fn layer_step(
    spec: &LayerSpec,
    weights: &Matrix,
    input: &Matrix,
    target: &Matrix,
) -> Result<(Matrix, f64)> {
    let z = weights.tr_matmul(input);
    let f = spec.activation.forward(&z);
    layer_step_with(spec, input, &z, &f, target)
}

/// Layer loss `L_m = Σ_i ℓ(f_m(U_mᵀ x_i^{(m-1)}), y_i^{(m)})` at arbitrary weights.
pub fn layer_loss_at(spec: &LayerSpec, weights: &Matrix, problem: &LayerProblem) -> Result<f64> {
    let f = spec.activation.forward(&weights.tr_matmul(&problem.input));
    spec.loss.total(&f, &problem.target)
}

/// `L_m` for the network's current weights.
pub fn layer_loss(net: &Network, batch: &Batch, m: usize) -> Result<f64> {
    let problem = LayerProblem::build(net, batch, m)?;
    let layer = net.layer_unchecked(m);
    layer_loss_at(&layer.spec, &layer.weights, &problem)
}

/// `∂L_m/∂U_m`, shape `d_{m-1} x d_m`.
pub fn layer_gradient(net: &Network, batch: &Batch, m: usize) -> Result<Matrix> {
    let problem = LayerProblem::build(net, batch, m)?;
    let layer = net.layer_unchecked(m);
    layer_step(&layer.spec, &layer.weights, &problem.input, &problem.target).map(|(g, _)| g)
}

/// Literal chain-rule evaluation with Kronecker Jacobians and column-major
/// de-vectorization. Memory is `O(d_m² d_{m-1})` per sample; meant for small layers.
pub fn kronecker_layer_gradient(net: &Network, batch: &Batch, m: usize) -> Result<Matrix> {
    let problem = LayerProblem::build(net, batch, m)?;
    let layer = net.layer_unchecked(m);
    let spec = layer.spec;
    let (d_in, d_out) = (spec.in_dim, spec.out_dim);
    let identity = Matrix::identity(d_out);
    let mut total = Matrix::zeros(d_in * d_out, 1);
    for i in 0..batch.size() {
        let x_row = Matrix::from_row_major(1, d_in, problem.input.column(i))?;
        let dz_du = identity.kron(&x_row);
        let z: Vec<f64> = layer.weights.tr_matmul(&Matrix::column_vector(&x_row.into_vec())).into_vec();
        let f: Vec<f64> = z.iter().map(|&v| spec.activation.apply(v)).collect();
        let df_dz = Matrix::diag(&z.iter().map(|&v| spec.activation.derivative(v)).collect::<Vec<_>>());
        let dl_df = Matrix::column_vector(&spec.loss.grad(&f, &problem.target.column(i))?);
        let term = dz_du.transpose().matmul(&df_dz.transpose()).matmul(&dl_df);
        for (t, v) in total.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *t += v;
        }
    }
    Matrix::unvec(total.as_slice(), d_in, d_out)
}

/// Central differences of `L_m` in every entry of `U_m`, with the layer's
/// input and backprojected target frozen at the current weights.
pub fn finite_difference_gradient(net: &Network, batch: &Batch, m: usize, h: f64) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(Error::Config("finite-difference step must be positive"));
    }
    let problem = LayerProblem::build(net, batch, m)?;
    let layer = net.layer_unchecked(m);
    let mut weights = layer.weights.clone();
    let mut grad = Matrix::zeros(weights.rows(), weights.cols());
    for idx in 0..weights.as_slice().len() {
        let orig = weights.as_slice()[idx];
        weights.as_mut_slice()[idx] = orig + h;
        let plus = layer_loss_at(&layer.spec, &weights, &problem)?;
        weights.as_mut_slice()[idx] = orig - h;
        let minus = layer_loss_at(&layer.spec, &weights, &problem)?;
        weights.as_mut_slice()[idx] = orig;
        grad.as_mut_slice()[idx] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, or the absolute difference when both vanish.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.sub(b).frobenius_norm();
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
