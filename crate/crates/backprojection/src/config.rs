//! Experiment configuration: a partially specified JSON document, resolved
//! against the loaded dataset into a fully explicit [`ResolvedConfig`].

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use backprojection_core::data::{label_dim, three_blobs, two_blobs};
use backprojection_core::{
    generate_blobs, ActivationKind, Dataset, KernelKind, LayerShape, LossKind, Procedure, TrainConfig,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AppError, AppResult};
use crate::formats::read_dataset_csv;

/// Serde adapter for core enums that round-trip through their string names.
mod named {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Same as `named`, for optional fields.
mod named_opt {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Backprojection,
    KernelBackprojection,
    Backpropagation,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Backprojection,
        Algorithm::KernelBackprojection,
        Algorithm::Backpropagation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Backprojection => "backprojection",
            Algorithm::KernelBackprojection => "kernel_backprojection",
            Algorithm::Backpropagation => "backpropagation",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            Algorithm::KernelBackprojection => 1e-5,
            _ => 1e-4,
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    TwoBlobs {
        #[serde(default)]
        seed: u64,
    },
    ThreeBlobs {
        #[serde(default)]
        seed: u64,
    },
    Blobs {
        n_per_class: Vec<usize>,
        means: Vec<Vec<f64>>,
        variances: Vec<f64>,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::TwoBlobs { seed: 0 }
    }
}

impl DatasetSpec {
    /// `two_blobs`, `three_blobs`, or a path to a CSV file.
    pub fn from_flag(value: &str, seed: u64) -> Self {
        match value {
            "two_blobs" => DatasetSpec::TwoBlobs { seed },
            "three_blobs" => DatasetSpec::ThreeBlobs { seed },
            path => DatasetSpec::Csv { path: path.into() },
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        match self {
            DatasetSpec::TwoBlobs { seed } | DatasetSpec::ThreeBlobs { seed } | DatasetSpec::Blobs { seed, .. } => {
                *seed = new_seed
            }
            DatasetSpec::Csv { .. } => {}
        }
    }

    pub fn load(&self) -> AppResult<Dataset> {
        match self {
            DatasetSpec::TwoBlobs { seed } => Ok(two_blobs(*seed)),
            DatasetSpec::ThreeBlobs { seed } => Ok(three_blobs(*seed)),
            DatasetSpec::Blobs {
                n_per_class,
                means,
                variances,
                seed,
            } => Ok(generate_blobs(n_per_class, means, variances, *seed)?),
            DatasetSpec::Csv { path } => read_dataset_csv(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    /// Omitted on the last layer to take the label dimensionality.
    #[serde(default)]
    pub units: Option<usize>,
    #[serde(with = "named")]
    pub activation: ActivationKind,
    #[serde(with = "named", default = "default_loss")]
    pub loss: LossKind,
}

fn default_loss() -> LossKind {
    LossKind::Mse
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelName,
    /// RBF bandwidth; defaults to `1/d`.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl KernelSpec {
    pub fn resolve(&self, data_dim: usize) -> AppResult<KernelSpec> {
        let gamma = match self.kind {
            KernelName::Linear => {
                if self.gamma.is_some() {
                    return Err(AppError::config("gamma only applies to the rbf kernel"));
                }
                None
            }
            KernelName::Rbf => Some(self.gamma.unwrap_or(1.0 / data_dim as f64)),
        };
        let resolved = KernelSpec { kind: self.kind, gamma };
        resolved.kind()?.validate()?;
        Ok(resolved)
    }

    pub fn kind(&self) -> AppResult<KernelKind> {
        match (self.kind, self.gamma) {
            (KernelName::Linear, _) => Ok(KernelKind::Linear),
            (KernelName::Rbf, Some(gamma)) => Ok(KernelKind::Rbf { gamma }),
            (KernelName::Rbf, None) => Err(AppError::config("rbf kernel needs a resolved gamma")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(with = "named_opt")]
    pub procedure: Option<Procedure>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub shuffle: Option<bool>,
}

/// Config as read from a file or flags; every field may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSpec>,
    pub standardize: Option<bool>,
    pub architecture: Option<Vec<LayerConfig>>,
    pub algorithm: Option<Algorithm>,
    pub kernel: Option<KernelSpec>,
    pub train: TrainSection,
    pub output_dir: Option<PathBuf>,
    /// Also write the per-update log `trace.csv`.
    pub trace: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedLayer {
    pub units: usize,
    #[serde(with = "named")]
    pub activation: ActivationKind,
    #[serde(with = "named")]
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedTrain {
    #[serde(with = "named")]
    pub procedure: Procedure,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

/// Fully explicit config, echoed into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub dataset: DatasetSpec,
    pub standardize: bool,
    pub architecture: Vec<ResolvedLayer>,
    pub algorithm: Algorithm,
    pub kernel: Option<KernelSpec>,
    pub train: ResolvedTrain,
    pub output_dir: PathBuf,
    pub trace: bool,
}

impl ResolvedConfig {
    pub fn shapes(&self) -> Vec<LayerShape> {
        self.architecture
            .iter()
            .map(|l| LayerShape::new(l.units, l.activation, l.loss))
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            procedure: self.train.procedure,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.train.seed,
            shuffle: self.train.shuffle,
        }
    }
}

/// Hidden layers of the default architecture; the output layer is sigmoid.
pub const DEFAULT_HIDDEN: [usize; 2] = [15, 20];

pub fn default_architecture() -> Vec<LayerConfig> {
    let mut layers: Vec<LayerConfig> = DEFAULT_HIDDEN
        .iter()
        .map(|&units| LayerConfig {
            units: Some(units),
            activation: ActivationKind::Elu,
            loss: LossKind::Mse,
        })
        .collect();
    layers.push(LayerConfig {
        units: None,
        activation: ActivationKind::Sigmoid,
        loss: LossKind::Mse,
    });
    layers
}

/// 200 epochs for binary backprojection and backpropagation, 300 for kernel
/// runs and for three or more classes.
pub fn default_epochs(algorithm: Algorithm, n_classes: usize) -> usize {
    if algorithm == Algorithm::KernelBackprojection || n_classes > 2 {
        300
    } else {
        TrainConfig::default().epochs
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::input(path, e))?;
        Self::from_json(&text)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm.unwrap_or(Algorithm::Backprojection)
    }

    /// Checks that need no data.
    pub fn validate(&self) -> AppResult<()> {
        match (self.algorithm(), &self.kernel) {
            (Algorithm::KernelBackprojection, None) => {
                Err(AppError::config("kernel_backprojection requires a kernel spec"))
            }
            (Algorithm::KernelBackprojection, Some(_)) => Ok(()),
            (other, Some(_)) => Err(AppError::config(format!(
                "a kernel spec is only valid with kernel_backprojection, not {}",
                other.name()
            ))),
            (_, None) => Ok(()),
        }
    }

    /// Fills every default, given the dataset the experiment will train on.
    pub fn resolve(&self, data: &Dataset) -> AppResult<ResolvedConfig> {
        self.validate()?;
        let algorithm = self.algorithm();
        let p = label_dim(data.n_classes);
        let layers = self.architecture.clone().unwrap_or_else(default_architecture);
        if layers.is_empty() {
            return Err(AppError::config("architecture needs at least one layer"));
        }
        let last = layers.len() - 1;
        let mut architecture = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let units = match (layer.units, i == last) {
                (Some(u), true) if u != p => {
                    return Err(AppError::config(format!(
                        "last layer has {u} units but the labels need {p}"
                    )))
                }
                (Some(0), _) => return Err(AppError::config("layer units must be positive")),
                (Some(u), _) => u,
                (None, true) => p,
                (None, false) => return Err(AppError::config(format!("layer {} needs units", i + 1))),
            };
            architecture.push(ResolvedLayer {
                units,
                activation: layer.activation,
                loss: layer.loss,
            });
        }
        let kernel = self.kernel.as_ref().map(|k| k.resolve(data.dim())).transpose()?;
        let defaults = TrainConfig::default();
        let t = &self.train;
        let resolved = ResolvedConfig {
            dataset: self.dataset.clone().unwrap_or_default(),
            standardize: self.standardize.unwrap_or(true),
            architecture,
            algorithm,
            kernel,
            train: ResolvedTrain {
                procedure: t.procedure.unwrap_or(defaults.procedure),
                learning_rate: t.learning_rate.unwrap_or(algorithm.default_learning_rate()),
                batch_size: t.batch_size.unwrap_or(defaults.batch_size),
                epochs: t.epochs.unwrap_or(default_epochs(algorithm, data.n_classes)),
                seed: t.seed.unwrap_or(defaults.seed),
                shuffle: t.shuffle.unwrap_or(defaults.shuffle),
            },
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            trace: self.trace.unwrap_or(false),
        };
        resolved.train_config().validate(data.len())?;
        Ok(resolved)
    }
}
