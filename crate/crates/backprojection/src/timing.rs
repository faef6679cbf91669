//! Per-epoch wall-time comparison of the three training algorithms.

use std::collections::BTreeMap;

use backprojection_core::data::encode_labels;
use backprojection_core::{
    standardize, train_backpropagation, train_backprojection, Dataset, KernelKind, KernelModel, LayerShape,
    Matrix, Network, TrainConfig, TrainingSet,
};
use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::error::{AppError, AppResult};
use crate::experiment::{mean_std, WallClock};

/// Fewest timed epochs accepted by [`epoch_timing_comparison`].
pub const MIN_TIMED_EPOCHS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub mean_epoch_seconds: f64,
    pub std: f64,
}

/// Algorithm name to timing, serialized in key order.
pub type TimingTable = BTreeMap<String, TimingEntry>;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSetup {
    pub shapes: Vec<LayerShape>,
    /// Shared schedule; `epochs` counts timed epochs only.
    pub config: TrainConfig,
    pub warmup_epochs: usize,
    pub kernel: KernelKind,
    pub kernel_learning_rate: f64,
}

/// Epoch seconds of one algorithm after the warm-up epochs.
pub fn time_algorithm(algorithm: Algorithm, data: &Dataset, setup: &TimingSetup) -> AppResult<Vec<f64>> {
    let (x, _) = standardize(&data.x)?;
    let mut config = setup.config;
    config.epochs = setup.warmup_epochs + setup.config.epochs;
    let inputs: Matrix = match algorithm {
        Algorithm::KernelBackprojection => {
            config.learning_rate = setup.kernel_learning_rate;
            KernelModel::build(setup.kernel, x)?.normalized().clone()
        }
        _ => x,
    };
    let last = setup
        .shapes
        .last()
        .ok_or_else(|| AppError::config("timing needs at least one layer"))?
        .activation;
    let targets = encode_labels(&data.labels, data.n_classes, last)?;
    let train = TrainingSet::new(inputs, targets, data.labels.clone())?;
    let mut net = Network::random(train.inputs.rows(), &setup.shapes, config.seed)?;
    let mut clock = WallClock::new(false);
    let report = match algorithm {
        Algorithm::Backpropagation => train_backpropagation(&mut net, &train, &config, &mut clock)?,
        _ => train_backprojection(&mut net, &train, &config, &mut clock)?,
    };
    Ok(report.epoch_seconds[setup.warmup_epochs..].to_vec())
}

/// Mean per-epoch wall time of backprojection, kernel backprojection, and
/// backpropagation under the same architecture and batch schedule.
pub fn epoch_timing_comparison(data: &Dataset, setup: &TimingSetup) -> AppResult<TimingTable> {
    if setup.config.epochs < MIN_TIMED_EPOCHS {
        return Err(AppError::config(format!(
            "timing needs at least {MIN_TIMED_EPOCHS} timed epochs, got {}",
            setup.config.epochs
        )));
    }
    let mut table = TimingTable::new();
    for algorithm in Algorithm::ALL {
        let (mean, std) = mean_std(&time_algorithm(algorithm, data, setup)?);
        table.insert(
            algorithm.name().to_string(),
            TimingEntry {
                mean_epoch_seconds: mean,
                std,
            },
        );
    }
    Ok(table)
}
