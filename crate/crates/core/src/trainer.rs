//! Layer-by-layer backprojection training.
//!
//! A single layer update forwards the batch up to layer `m-1`, backprojects
//! the labels down to layer `m` (projecting onto each inverse's feasible set
//! first) and takes one gradient step on `U_m`. A sweep updates every layer
//! once per batch, in the order fixed by the [`Procedure`].

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gradient::{layer_step, layer_step_with, Batch, LayerProblem};
use crate::matrix::Matrix;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Procedure {
    /// Layers `1..=n` for every batch.
    Forward,
    /// Layers `n..=1` for every batch.
    Backward,
    /// Odd batches forward, even batches backward (batches counted from 1 within an epoch).
    ForwardBackward,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [Procedure::Forward, Procedure::Backward, Procedure::ForwardBackward];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Forward => "forward",
            Procedure::Backward => "backward",
            Procedure::ForwardBackward => "forward_backward",
        }
    }

    /// Sweep direction for the 1-based `batch` index.
    pub fn direction(self, batch: usize) -> Direction {
        match self {
            Procedure::Forward => Direction::Up,
            Procedure::Backward => Direction::Down,
            Procedure::ForwardBackward if batch % 2 == 1 => Direction::Up,
            Procedure::ForwardBackward => Direction::Down,
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Procedure::Forward),
            "backward" => Ok(Procedure::Backward),
            "forward_backward" => Ok(Procedure::ForwardBackward),
            _ => Err(Error::Config("unknown procedure (expected forward, backward or forward_backward)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub procedure: Procedure,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            procedure: Procedure::Forward,
            learning_rate: 1e-4,
            batch_size: 30,
            epochs: 200,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive and finite"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::Config("batch size must be between 1 and the sample count"));
        }
        Ok(())
    }
}

/// Inputs, encoded targets, and class labels of a training set, column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(inputs: Matrix, targets: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n = inputs.cols();
        if n == 0 {
            return Err(Error::Config("training set is empty"));
        }
        if targets.cols() != n || labels.len() != n {
            return Err(Error::Shape {
                context: "training set columns",
                expected: (targets.rows(), n),
                found: (targets.rows(), targets.cols().min(labels.len())),
            });
        }
        Ok(Self {
            inputs,
            targets,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select_columns(indices),
            targets: self.targets.select_columns(indices),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample output loss over the training set after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Wall time of each epoch's update loop, excluding loss evaluation.
    pub epoch_seconds: Vec<f64>,
    pub final_accuracy: f64,
}

/// One layer update, 1-based epoch/batch/layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub epoch: usize,
    pub batch: usize,
    pub layer: usize,
    /// Layer loss before the step.
    pub loss: f64,
}

/// Clock and trace hooks for a training run. `()` ignores both.
pub trait TrainMonitor {
    /// Monotonic seconds; only differences are used.
    fn now(&mut self) -> f64 {
        0.0
    }

    fn on_update(&mut self, _record: &UpdateRecord) {}
}

impl TrainMonitor for () {}

impl TrainMonitor for Vec<UpdateRecord> {
    fn on_update(&mut self, record: &UpdateRecord) {
        self.push(*record);
    }
}

/// Per-epoch batch order, reproducible from the seed.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    rng: ChaCha8Rng,
    n: usize,
    batch_size: usize,
    shuffle: bool,
}

impl BatchSchedule {
    pub fn new(n: usize, config: &TrainConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            n,
            batch_size: config.batch_size,
            shuffle: config.shuffle,
        }
    }

    /// Sample indices of each batch for the next epoch; the last batch keeps the remainder.
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        if self.shuffle {
            order.shuffle(&mut self.rng);
        }
        order.chunks(self.batch_size).map(|c| c.to_vec()).collect()
    }
}

/// Mean per-sample loss of the network output against the encoded targets.
pub fn mean_output_loss(net: &Network, data: &TrainingSet) -> Result<f64> {
    let out = net.output(&data.inputs)?;
    let loss = net.last_layer().spec.loss.total(&out, &data.targets)?;
    Ok(loss / data.len() as f64)
}

pub fn accuracy(net: &Network, data: &TrainingSet) -> Result<f64> {
    let predicted = net.predict(&data.inputs)?;
    let hits = predicted.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / data.len() as f64)
}

fn check_step(loss: f64, grad: &Matrix, epoch: usize, batch: usize, layer: usize) -> Result<()> {
    if loss.is_finite() && grad.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch, batch, layer })
    }
}

/// One literal layer update: forward to `m-1`, backproject to `m`, and step
/// `U_m ← U_m − η ∂L_m/∂U_m`. Only layer `m` changes. Returns the pre-step loss.
pub fn update_layer_weights(
    net: &mut Network,
    inputs: &Matrix,
    targets: &Matrix,
    m: usize,
    learning_rate: f64,
) -> Result<f64> {
    let batch = Batch::new(inputs.clone(), targets.clone())?;
    let problem = LayerProblem::build(net, &batch, m)?;
    let layer = net.layer_unchecked_mut(m);
    let (grad, loss) = layer_step(&layer.spec, &layer.weights, &problem.input, &problem.target)?;
    layer.weights.sub_scaled_assign(learning_rate, &grad);
    Ok(loss)
}

/// Updates every layer once for `batch`, reusing intermediate results that
/// the sweep order leaves untouched. Produces the same weights as calling
/// [`update_layer_weights`] layer by layer in the same order.
fn sweep(
    net: &mut Network,
    batch: &Batch,
    direction: Direction,
    learning_rate: f64,
    mut visit: impl FnMut(usize, f64, &Matrix) -> Result<()>,
) -> Result<()> {
    let n_layers = net.n_layers();
    match direction {
        Direction::Up => {
            // Targets only depend on layers above m, which are not yet updated.
            let mut targets: Vec<Matrix> = Vec::with_capacity(n_layers);
            targets.push(batch.targets.clone());
            for r in (1..n_layers).rev() {
                let next = net.layer_unchecked(r + 1).backproject(targets.last().unwrap());
                targets.push(next);
            }
            targets.reverse();

            let mut input = batch.inputs.clone();
            for m in 1..=n_layers {
                let layer = net.layer_unchecked_mut(m);
                let (grad, loss) = layer_step(&layer.spec, &layer.weights, &input, &targets[m - 1])?;
                visit(m, loss, &grad)?;
                layer.weights.sub_scaled_assign(learning_rate, &grad);
                if m < n_layers {
                    input = layer.activate(&input);
                }
            }
        }
        Direction::Down => {
            // Layers below m are not yet updated, so the forward pass at sweep
            // start already holds X^{(m-1)}, Z^{(m)} and f(Z^{(m)}) for layer m.
            let trace = net.forward_pass(&batch.inputs, n_layers)?;
            let mut target = batch.targets.clone();
            for m in (1..=n_layers).rev() {
                let input = if m > 1 { &trace[m - 2].post } else { &batch.inputs };
                let here = &trace[m - 1];
                let layer = net.layer_unchecked_mut(m);
                let (grad, loss) = layer_step_with(&layer.spec, input, &here.pre, &here.post, &target)?;
                visit(m, loss, &grad)?;
                layer.weights.sub_scaled_assign(learning_rate, &grad);
                if m > 1 {
                    target = layer.backproject(&target);
                }
            }
        }
    }
    Ok(())
}

/// Trains `net` with mini-batch backprojection for `config.epochs` epochs.
pub fn train_backprojection<M: TrainMonitor + ?Sized>(
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
            let direction = config.procedure.direction(batch_no);
            sweep(net, &batch, direction, config.learning_rate, |layer, loss, grad| {
                check_step(loss, grad, epoch, batch_no, layer)?;
                monitor.on_update(&UpdateRecord {
                    epoch,
                    batch: batch_no,
                    layer,
                    loss,
                });
                Ok(())
            })
            .map_err(|e| locate(e, epoch, batch_no))?;
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

/// Numerical failures inside a batch surface as a located non-finite-loss abort.
pub(crate) fn locate(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonPositiveActivation { .. } | Error::Domain { .. } => Error::NonFiniteLoss {
            epoch,
            batch,
            layer: 0,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind::*;
    use crate::loss::LossKind;
    use crate::network::{Layer, LayerShape, LayerSpec};
    use alloc::vec;

    fn small_set() -> TrainingSet {
        let x = Matrix::from_fn(2, 12, |i, j| libm::sin((i * 12 + j) as f64 * 0.7) * 2.0);
        let labels: Vec<usize> = (0..12).map(|j| usize::from(x[(0, j)] > 0.0)).collect();
        let y = Matrix::from_fn(1, 12, |_, j| labels[j] as f64);
        TrainingSet::new(x, y, labels).unwrap()
    }

    fn three_layer_net(seed: u64) -> Network {
        Network::random(
            2,
            &[
                LayerShape::new(4, Elu, LossKind::Mse),
                LayerShape::new(3, Tanh, LossKind::Mse),
                LayerShape::new(1, Sigmoid, LossKind::Mse),
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn hand_case_descent_step() {
        let mut net = Network::new(vec![Layer {
            spec: LayerSpec {
                in_dim: 2,
                out_dim: 2,
                activation: Linear,
                loss: LossKind::Mse,
            },
            weights: Matrix::identity(2),
        }])
        .unwrap();
        let x = Matrix::column_vector(&[1.0, 0.0]);
        let y = Matrix::column_vector(&[0.0, 0.0]);
        update_layer_weights(&mut net, &x, &y, 1, 0.1).unwrap();
        let expected = Matrix::from_rows(&[&[0.8, 0.0], &[0.0, 1.0]]);
        assert!(net.weights(1).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn zero_step_and_stationary_point_leave_weights() {
        let mut net = three_layer_net(1);
        let data = small_set();
        let before = net.clone();
        for m in 1..=3 {
            update_layer_weights(&mut net, &data.inputs, &data.targets, m, 0.0).unwrap();
        }
        assert_eq!(net, before);

        let linear = Network::random(2, &[LayerShape::new(2, Linear, LossKind::Mse)], 3).unwrap();
        let y = linear.output(&data.inputs).unwrap();
        let mut moved = linear.clone();
        update_layer_weights(&mut moved, &data.inputs, &y, 1, 0.5).unwrap();
        assert!(moved.weights(1).unwrap().max_abs_diff(linear.weights(1).unwrap()) < 1e-14);
    }

    #[test]
    fn update_touches_only_its_layer() {
        let data = small_set();
        for m in 1..=3 {
            let before = three_layer_net(2);
            let mut net = before.clone();
            update_layer_weights(&mut net, &data.inputs, &data.targets, m, 0.05).unwrap();
            for r in 1..=3 {
                let same = net.weights(r).unwrap() == before.weights(r).unwrap();
                assert_eq!(same, r != m, "layer {r} after updating {m}");
            }
        }
    }

    #[test]
    fn cached_sweeps_match_literal_updates() {
        let data = small_set();
        let batch = data.batch(&[0, 3, 5, 7, 9]);
        for direction in [Direction::Up, Direction::Down] {
            let mut fast = three_layer_net(4);
            let mut literal = fast.clone();
            sweep(&mut fast, &batch, direction, 0.05, |_, _, _| Ok(())).unwrap();
            let order: Vec<usize> = match direction {
                Direction::Up => (1..=3).collect(),
                Direction::Down => (1..=3).rev().collect(),
            };
            for m in order {
                update_layer_weights(&mut literal, &batch.inputs, &batch.targets, m, 0.05).unwrap();
            }
            assert_eq!(fast, literal, "{direction:?}");
        }
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut net = three_layer_net(5);
        let before = net.clone();
        let config = TrainConfig {
            epochs: 0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let report = train_backprojection(&mut net, &small_set(), &config, &mut ()).unwrap();
        assert!(report.epoch_loss.is_empty() && report.epoch_seconds.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn forward_backward_alternates_by_batch_parity() {
        let mut net = three_layer_net(6);
        let config = TrainConfig {
            procedure: Procedure::ForwardBackward,
            batch_size: 6,
            epochs: 1,
            ..TrainConfig::default()
        };
        let mut trace: Vec<UpdateRecord> = Vec::new();
        train_backprojection(&mut net, &small_set(), &config, &mut trace).unwrap();
        let order: Vec<(usize, usize)> = trace.iter().map(|r| (r.batch, r.layer)).collect();
        assert_eq!(order, vec![(1, 1), (1, 2), (1, 3), (2, 3), (2, 2), (2, 1)]);
    }

    #[test]
    fn remainder_batch_is_kept() {
        let config = TrainConfig {
            batch_size: 5,
            ..TrainConfig::default()
        };
        let batches = BatchSchedule::new(12, &config).next_epoch();
        assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5, 2]);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_invalid_config() {
        let mut net = three_layer_net(7);
        let data = small_set();
        let bad_rate = TrainConfig {
            learning_rate: 0.0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        assert!(train_backprojection(&mut net, &data, &bad_rate, &mut ()).is_err());
        let bad_batch = TrainConfig {
            batch_size: 13,
            ..TrainConfig::default()
        };
        assert!(train_backprojection(&mut net, &data, &bad_batch, &mut ()).is_err());
    }

    #[test]
    fn divergence_aborts_with_location() {
        let mut net = Network::random(2, &[LayerShape::new(1, Linear, LossKind::Mse)], 0).unwrap();
        let data = small_set();
        let config = TrainConfig {
            learning_rate: 1e200,
            batch_size: 12,
            epochs: 5,
            ..TrainConfig::default()
        };
        match train_backprojection(&mut net, &data, &config, &mut ()) {
            Err(Error::NonFiniteLoss { epoch, batch, .. }) => assert!(epoch >= 1 && batch == 1),
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn procedure_names() {
        for p in Procedure::ALL {
            assert_eq!(p.name().parse::<Procedure>().unwrap(), p);
        }
    }
}
