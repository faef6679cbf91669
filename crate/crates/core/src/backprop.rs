//! End-to-end backpropagation baseline over the same layer stack.
//!
//! Only the last layer's loss is minimized; hidden-layer loss kinds are ignored.
//! All layer gradients come from one forward and one reverse pass per batch and
//! are applied together.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gradient::{output_delta, Batch};
use crate::matrix::Matrix;
use crate::network::Network;
use crate::trainer::{
    accuracy, locate, mean_output_loss, BatchSchedule, TrainConfig, TrainMonitor, TrainReport,
    TrainingSet, UpdateRecord,
};

/// `Σ_i ℓ(x_i^{(n_ℓ)}, y_i)` with the last layer's loss.
pub fn end_to_end_loss(net: &Network, batch: &Batch) -> Result<f64> {
    let out = net.output(&batch.inputs)?;
    net.last_layer().spec.loss.total(&out, &batch.targets)
}

/// Gradients of [`end_to_end_loss`] for every layer (index 0 is layer 1), plus the loss.
pub fn backprop_gradients(net: &Network, batch: &Batch) -> Result<(Vec<Matrix>, f64)> {
    net.check_targets(&batch.targets)?;
    let n_layers = net.n_layers();
    let trace = net.forward_pass(&batch.inputs, n_layers)?;
    let mut grads: Vec<Matrix> = Vec::with_capacity(n_layers);

    let last = net.last_layer();
    let out = &trace[n_layers - 1];
    let (mut delta, loss) = output_delta(&last.spec, &out.pre, &out.post, &batch.targets)?;
    let top_input = if n_layers > 1 {
        &trace[n_layers - 2].post
    } else {
        &batch.inputs
    };
    grads.push(top_input.matmul_tr(&delta));
    for m in (1..n_layers).rev() {
        let above = net.layer_unchecked(m + 1);
        let activation = net.layer_unchecked(m).spec.activation;
        let here = &trace[m - 1];
        delta = above.weights.matmul(&delta);
        let entries = here.pre.as_slice().iter().zip(here.post.as_slice());
        for (d, (&z, &f)) in delta.as_mut_slice().iter_mut().zip(entries) {
            *d *= activation.derivative_given(z, f);
        }
        let input = if m > 1 { &trace[m - 2].post } else { &batch.inputs };
        grads.push(input.matmul_tr(&delta));
    }
    grads.reverse();
    Ok((grads, loss))
}

/// Central differences of [`end_to_end_loss`] in every weight of every layer.
pub fn finite_difference_network_gradient(net: &Network, batch: &Batch, h: f64) -> Result<Vec<Matrix>> {
    if !(h > 0.0) {
        return Err(Error::Config("finite-difference step must be positive"));
    }
    let mut probe = net.clone();
    let mut grads = Vec::with_capacity(net.n_layers());
    for m in 1..=net.n_layers() {
        let (rows, cols) = net.weights(m)?.shape();
        let mut grad = Matrix::zeros(rows, cols);
        for idx in 0..rows * cols {
            let orig = probe.weights(m)?.as_slice()[idx];
            probe.weights_mut(m)?.as_mut_slice()[idx] = orig + h;
            let plus = end_to_end_loss(&probe, batch)?;
            probe.weights_mut(m)?.as_mut_slice()[idx] = orig - h;
            let minus = end_to_end_loss(&probe, batch)?;
            probe.weights_mut(m)?.as_mut_slice()[idx] = orig;
            grad.as_mut_slice()[idx] = (plus - minus) / (2.0 * h);
        }
        grads.push(grad);
    }
    Ok(grads)
}

/// Mini-batch gradient descent with the same schedule and report as backprojection.
pub fn train_backpropagation<M: TrainMonitor + ?Sized>(
    net: &mut Network,
    data: &TrainingSet,
    config: &TrainConfig,
    monitor: &mut M,
) -> Result<TrainReport> {
    config.validate(data.len())?;
    net.check_input(&data.inputs)?;
    net.check_targets(&data.targets)?;

    let mut schedule = BatchSchedule::new(data.len(), config);
    let mut report = TrainReport::default();
    for epoch in 1..=config.epochs {
        let batches = schedule.next_epoch();
        let start = monitor.now();
        for (b, indices) in batches.iter().enumerate() {
            let batch_no = b + 1;
            let batch = data.batch(indices);
            let (grads, loss) = backprop_gradients(net, &batch).map_err(|e| locate(e, epoch, batch_no))?;
            for (i, grad) in grads.iter().enumerate() {
                let layer = i + 1;
                if !loss.is_finite() || !grad.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                        layer,
                    });
                }
                monitor.on_update(&UpdateRecord {
                    epoch,
                    batch: batch_no,
                    layer,
                    loss,
                });
            }
            for (i, grad) in grads.iter().enumerate() {
                net.layer_unchecked_mut(i + 1)
                    .weights
                    .sub_scaled_assign(config.learning_rate, grad);
            }
        }
        report.epoch_seconds.push(monitor.now() - start);
        let loss = mean_output_loss(net, data).map_err(|e| locate(e, epoch, batches.len()))?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batches.len(),
                layer: net.n_layers(),
            });
        }
        report.epoch_loss.push(loss);
    }
    report.final_accuracy = accuracy(net, data)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind::{self, *};
    use crate::gradient::relative_error;
    use crate::loss::LossKind;
    use crate::network::{Layer, LayerShape, LayerSpec};
    use alloc::vec;

    #[test]
    fn single_linear_layer_hand_case() {
        let net = Network::new(vec![Layer {
            spec: LayerSpec {
                in_dim: 2,
                out_dim: 2,
                activation: Linear,
                loss: LossKind::Mse,
            },
            weights: Matrix::identity(2),
        }])
        .unwrap();
        let batch = Batch::new(Matrix::column_vector(&[1.0, 0.0]), Matrix::column_vector(&[0.0, 0.0])).unwrap();
        let (grads, loss) = backprop_gradients(&net, &batch).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grads[0], Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]]));
    }

    #[test]
    fn gradients_match_stencil() {
        let acts: [ActivationKind; 3] = [Elu, Tanh, Sigmoid];
        let net = Network::random(
            3,
            &[
                LayerShape::new(4, acts[0], LossKind::Mse),
                LayerShape::new(3, acts[1], LossKind::Mse),
                LayerShape::new(2, acts[2], LossKind::CrossEntropy),
            ],
            9,
        )
        .unwrap();
        let x = Matrix::from_fn(3, 5, |i, j| libm::cos((i * 5 + j) as f64));
        let y = Matrix::from_fn(2, 5, |i, j| ((i + j) % 2) as f64);
        let batch = Batch::new(x, y).unwrap();
        let (grads, _) = backprop_gradients(&net, &batch).unwrap();
        let fd = finite_difference_network_gradient(&net, &batch, 1e-5).unwrap();
        for (g, f) in grads.iter().zip(&fd) {
            assert!(relative_error(g, f) < 1e-6);
        }
    }
}
