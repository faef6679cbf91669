//! Config-driven training runs and their on-disk artifacts.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use backprojection_core::data::encode_labels;
use backprojection_core::{
    standardize, train_backpropagation, train_backprojection, Dataset, KernelModel, Network,
    TrainMonitor, TrainReport, TrainingSet, UpdateRecord,
};
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig, ResolvedConfig};
use crate::error::{AppError, AppResult};
use crate::formats::write_json;
use crate::model::{bounding_box, Model};

/// Monotonic clock since construction, with an optional update log.
#[derive(Debug)]
pub struct WallClock {
    start: Instant,
    pub trace: Option<Vec<UpdateRecord>>,
}

impl WallClock {
    pub fn new(trace: bool) -> Self {
        Self {
            start: Instant::now(),
            trace: trace.then(Vec::new),
        }
    }
}

impl TrainMonitor for WallClock {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_update(&mut self, record: &UpdateRecord) {
        if let Some(trace) = &mut self.trace {
            trace.push(*record);
        }
    }
}

/// Everything a run needs before training starts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ResolvedConfig,
    pub data: Dataset,
    pub train: TrainingSet,
    /// Untrained model; `network` holds the seeded initial weights.
    pub model: Model,
}

/// Loads and preprocesses the data, resolves defaults, and initializes the network.
pub fn prepare(config: &ExperimentConfig) -> AppResult<Prepared> {
    config.validate()?;
    let data = config.dataset.clone().unwrap_or_default().load()?;
    let resolved = config.resolve(&data)?;
    let (x, standardization) = if resolved.standardize {
        let (x, s) = standardize(&data.x)?;
        (x, Some(s))
    } else {
        (data.x.clone(), None)
    };
    let kernel = match &resolved.kernel {
        Some(spec) => Some(KernelModel::build(spec.kind()?, x.clone())?),
        None => None,
    };
    let inputs = kernel.as_ref().map_or(x, |k| k.normalized().clone());
    let shapes = resolved.shapes();
    let network = Network::random(inputs.rows(), &shapes, resolved.train.seed)?;
    let last = shapes.last().expect("resolved architecture is non-empty").activation;
    let targets = encode_labels(&data.labels, data.n_classes, last)?;
    let train = TrainingSet::new(inputs, targets, data.labels.clone())?;
    let model = Model {
        network,
        kernel,
        standardization,
        n_classes: data.n_classes,
        data_bounds: bounding_box(&data.x),
    };
    Ok(Prepared {
        config: resolved,
        data,
        train,
        model,
    })
}

/// Trains the prepared model in place.
pub fn train<M: TrainMonitor>(prepared: &mut Prepared, monitor: &mut M) -> AppResult<TrainReport> {
    let config = prepared.config.train_config();
    let net = &mut prepared.model.network;
    let report = match prepared.config.algorithm {
        Algorithm::Backprojection | Algorithm::KernelBackprojection => {
            train_backprojection(net, &prepared.train, &config, monitor)
        }
        Algorithm::Backpropagation => train_backpropagation(net, &prepared.train, &config, monitor),
    }?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub mean_epoch_seconds: f64,
    pub std_epoch_seconds: f64,
}

/// `report.json` layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub final_accuracy: f64,
    pub final_mean_loss: Option<f64>,
    pub timing: Timing,
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub config: ResolvedConfig,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub model: Model,
    pub trace: Option<Vec<UpdateRecord>>,
}

/// Mean and sample standard deviation; zero spread for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> AppResult<Outcome> {
    let mut prepared = prepare(config)?;
    let mut clock = WallClock::new(prepared.config.trace);
    let report = train(&mut prepared, &mut clock)?;
    let (mean, std) = mean_std(&report.epoch_seconds);
    let run = RunReport {
        final_accuracy: report.final_accuracy,
        final_mean_loss: report.epoch_loss.last().copied(),
        timing: Timing {
            total_seconds: report.epoch_seconds.iter().sum(),
            mean_epoch_seconds: mean,
            std_epoch_seconds: std,
        },
        epoch_loss: report.epoch_loss,
        epoch_seconds: report.epoch_seconds,
        config: prepared.config,
    };
    Ok(Outcome {
        report: run,
        model: prepared.model,
        trace: clock.trace,
    })
}

/// Runs the experiment and writes `loss_curve.csv`, `report.json`, `model.json`
/// (and `trace.csv` when requested) into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> AppResult<Outcome> {
    let outcome = execute(config)?;
    write_artifacts(&outcome, &outcome.report.config.output_dir)?;
    Ok(outcome)
}

pub fn write_artifacts(outcome: &Outcome, dir: &Path) -> AppResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let report = &outcome.report;
    let curve = loss_curve_csv(&report.epoch_loss, &report.epoch_seconds);
    let path = dir.join("loss_curve.csv");
    std::fs::write(&path, curve).map_err(|e| AppError::io(&path, e))?;
    write_json(report, &dir.join("report.json"))?;
    outcome.model.save(&dir.join("model.json"))?;
    if let Some(trace) = &outcome.trace {
        let path = dir.join("trace.csv");
        std::fs::write(&path, trace_csv(trace)).map_err(|e| AppError::io(&path, e))?;
    }
    Ok(())
}

/// `epoch,mean_loss,wall_seconds`, where `wall_seconds` is the epoch's update time.
pub fn loss_curve_csv(epoch_loss: &[f64], epoch_seconds: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss,wall_seconds\n");
    for (i, (loss, secs)) in epoch_loss.iter().zip(epoch_seconds).enumerate() {
        writeln!(out, "{},{loss},{secs}", i + 1).unwrap();
    }
    out
}

pub fn trace_csv(trace: &[UpdateRecord]) -> String {
    let mut out = String::from("epoch,batch,layer,loss\n");
    for r in trace {
        writeln!(out, "{},{},{},{}", r.epoch, r.batch, r.layer, r.loss).unwrap();
    }
    out
}

/// Drops the `wall_seconds` column, leaving what must be reproducible.
pub fn strip_wall_seconds(curve: &str) -> String {
    curve
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
