//! Layer stack, forward projection, and label backprojection.
//!
//! Layers are numbered from 1 to `n_layers()`, so that layer `m` holds the
//! weight matrix `U_m` of shape `d_{m-1} x d_m` and computes
//! `x^{(m)} = f_m(U_mᵀ x^{(m-1)})`. There are no bias terms.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `in_dim x out_dim`.
    pub weights: Matrix,
}

impl Layer {
    /// Projects and activates a column-wise batch, returning `(Z, X)`.
    pub fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let z = self.weights.tr_matmul(input);
        let x = self.spec.activation.forward(&z);
        (z, x)
    }

    pub(crate) fn activate(&self, input: &Matrix) -> Matrix {
        self.spec.activation.forward(&self.weights.tr_matmul(input))
    }

    /// `U Π⁻¹`-step of label backprojection: `U f⁻¹(Π(target))`.
    pub(crate) fn backproject(&self, target: &Matrix) -> Matrix {
        self.weights
            .matmul(&self.spec.activation.project_and_invert(target))
    }
}

/// Output of a single layer during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    /// Pre-activation `Z^{(r)} = U_rᵀ X^{(r-1)}`.
    pub pre: Matrix,
    /// Post-activation `X^{(r)} = f_r(Z^{(r)})`.
    pub post: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Unit count, activation, and loss of one layer; input width is implied by the previous layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerShape {
    pub units: usize,
    pub activation: ActivationKind,
    pub loss: LossKind,
}

impl LayerShape {
    pub fn new(units: usize, activation: ActivationKind, loss: LossKind) -> Self {
        Self {
            units,
            activation,
            loss,
        }
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            let spec = layer.spec;
            if spec.in_dim == 0 || spec.out_dim == 0 {
                return Err(Error::Config("layer dimensions must be positive"));
            }
            if layer.weights.shape() != (spec.in_dim, spec.out_dim) {
                return Err(Error::Shape {
                    context: "layer weights",
                    expected: (spec.in_dim, spec.out_dim),
                    found: layer.weights.shape(),
                });
            }
            if i > 0 && layers[i - 1].spec.out_dim != spec.in_dim {
                return Err(Error::Shape {
                    context: "consecutive layer widths",
                    expected: (layers[i - 1].spec.out_dim, 0),
                    found: (spec.in_dim, 0),
                });
            }
            if spec.loss == LossKind::CrossEntropy && !spec.activation.is_positive() {
                return Err(Error::Config(
                    "cross_entropy requires a strictly positive (sigmoid) activation",
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Builds a network with i.i.d. `N(0, 1/d_{m-1})` weights drawn from a seeded generator.
    pub fn random(input_dim: usize, shapes: &[LayerShape], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(shapes.len());
        let mut in_dim = input_dim;
        for shape in shapes {
            let std = 1.0 / libm::sqrt(in_dim.max(1) as f64);
            let weights = Matrix::from_fn(in_dim, shape.units, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * std
            });
            layers.push(Layer {
                spec: LayerSpec {
                    in_dim,
                    out_dim: shape.units,
                    activation: shape.activation,
                    loss: shape.loss,
                },
                weights,
            });
            in_dim = shape.units;
        }
        Self::new(layers)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer `m`, 1-based.
    pub fn layer(&self, m: usize) -> Result<&Layer> {
        self.check_layer(m)?;
        Ok(&self.layers[m - 1])
    }

    pub fn weights(&self, m: usize) -> Result<&Matrix> {
        self.layer(m).map(|l| &l.weights)
    }

    pub fn weights_mut(&mut self, m: usize) -> Result<&mut Matrix> {
        self.check_layer(m)?;
        Ok(&mut self.layers[m - 1].weights)
    }

    pub fn last_layer(&self) -> &Layer {
        &self.layers[self.layers.len() - 1]
    }

    pub(crate) fn layer_unchecked(&self, m: usize) -> &Layer {
        &self.layers[m - 1]
    }

    pub(crate) fn layer_unchecked_mut(&mut self, m: usize) -> &mut Layer {
        &mut self.layers[m - 1]
    }

    pub(crate) fn check_layer(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.layers.len() {
            return Err(Error::LayerIndex {
                layer: m,
                n_layers: self.layers.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.rows() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: (self.input_dim(), x.cols()),
                found: x.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_targets(&self, y: &Matrix) -> Result<()> {
        if y.rows() != self.output_dim() {
            return Err(Error::Shape {
                context: "label matrix",
                expected: (self.output_dim(), y.cols()),
                found: y.shape(),
            });
        }
        Ok(())
    }

    /// Runs layers `1..=upto`, returning `(Z^{(r)}, X^{(r)})` for each. `upto = 0` returns nothing.
    pub fn forward_pass(&self, x: &Matrix, upto: usize) -> Result<Vec<LayerOutput>> {
        self.check_input(x)?;
        if upto > self.layers.len() {
            return Err(Error::LayerIndex {
                layer: upto,
                n_layers: self.layers.len(),
            });
        }
        let mut outputs: Vec<LayerOutput> = Vec::with_capacity(upto);
        for layer in &self.layers[..upto] {
            let input = outputs.last().map_or(x, |o| &o.post);
            let (pre, post) = layer.forward(input);
            outputs.push(LayerOutput { pre, post });
        }
        Ok(outputs)
    }

    /// `X^{(m)}` for `0 ≤ m ≤ n_layers`, where `X^{(0)}` is the input itself.
    pub fn activations_at(&self, x: &Matrix, m: usize) -> Result<Matrix> {
        self.check_input(x)?;
        if m > self.layers.len() {
            return Err(Error::LayerIndex {
                layer: m,
                n_layers: self.layers.len(),
            });
        }
        let mut current = x.clone();
        for layer in &self.layers[..m] {
            current = layer.activate(&current);
        }
        Ok(current)
    }

    /// Network output `X^{(n_ℓ)}`.
    pub fn output(&self, x: &Matrix) -> Result<Matrix> {
        self.activations_at(x, self.layers.len())
    }

    /// Backprojects labels from the output down to layer `m`:
    /// `Y^{(r)} = U_{r+1} f_{r+1}⁻¹(Π(Y^{(r+1)}))` for `r = n_ℓ-1, …, m`.
    pub fn backproject_labels(&self, y: &Matrix, downto: usize) -> Result<Matrix> {
        self.check_layer(downto)?;
        self.check_targets(y)?;
        let mut target = y.clone();
        for r in (downto..self.layers.len()).rev() {
            target = self.layers[r].backproject(&target);
        }
        Ok(target)
    }

    /// Class prediction per column: argmax for multi-output networks (lowest index
    /// wins ties), a threshold on the single output otherwise.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let out = self.output(x)?;
        Ok(classify_outputs(&out, self.last_layer().spec.activation))
    }
}

/// Decision threshold for single-output networks: midpoint of the binary targets.
pub fn binary_threshold(activation: ActivationKind) -> f64 {
    match activation {
        ActivationKind::Tanh => 0.0,
        ActivationKind::Sigmoid | ActivationKind::Linear | ActivationKind::Elu => 0.5,
    }
}

/// Maps a `p x b` output matrix to class indices.
pub fn classify_outputs(out: &Matrix, last_activation: ActivationKind) -> Vec<usize> {
    if out.rows() == 1 {
        let t = binary_threshold(last_activation);
        return out.row(0).iter().map(|&v| usize::from(v >= t)).collect();
    }
    (0..out.cols())
        .map(|j| {
            let mut best = 0;
            for i in 1..out.rows() {
                if out[(i, j)] > out[(best, j)] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
