//! A trained network together with everything needed to evaluate it on raw points.

use std::path::Path;

use backprojection_core::network::classify_outputs;
use backprojection_core::{KernelKind, KernelModel, Matrix, Network, Standardization};
use serde::{Deserialize, Serialize};

use crate::config::{KernelName, KernelSpec};
use crate::error::{AppError, AppResult};
use crate::formats::{write_json, LayerDoc, NetworkDoc};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    /// Present for kernel backprojection; its training points are already standardized.
    pub kernel: Option<KernelModel>,
    pub standardization: Option<Standardization>,
    pub n_classes: usize,
    /// Per-feature `(min, max)` of the raw training data.
    pub data_bounds: Vec<(f64, f64)>,
}

impl Model {
    /// Raw input dimensionality.
    pub fn data_dim(&self) -> usize {
        self.data_bounds.len()
    }

    /// Network outputs for raw points given column-wise (`d x m`).
    pub fn outputs(&self, points: &Matrix) -> AppResult<Matrix> {
        if points.rows() != self.data_dim() {
            return Err(AppError::config(format!(
                "points have dimension {} but the model expects {}",
                points.rows(),
                self.data_dim()
            )));
        }
        let x = match &self.standardization {
            Some(s) => s.apply(points)?,
            None => points.clone(),
        };
        let input = match &self.kernel {
            Some(k) => k.test_kernel_matrix(&x)?,
            None => x,
        };
        Ok(self.network.output(&input)?)
    }

    pub fn classify(&self, outputs: &Matrix) -> Vec<usize> {
        classify_outputs(outputs, self.network.last_layer().spec.activation)
    }

    pub fn predict(&self, points: &Matrix) -> AppResult<Vec<usize>> {
        Ok(self.classify(&self.outputs(points)?))
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            n_classes: self.n_classes,
            data_bounds: self.data_bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            standardization: self.standardization.as_ref().map(|s| StandardizationDoc {
                mean: s.mean.clone(),
                std: s.std.clone(),
            }),
            kernel: self.kernel.as_ref().map(|k| {
                let (kind, gamma) = match *k.kind() {
                    KernelKind::Linear => (KernelName::Linear, None),
                    KernelKind::Rbf { gamma } => (KernelName::Rbf, Some(gamma)),
                };
                let x = k.train_x();
                KernelDoc {
                    kind,
                    gamma,
                    train_x: (0..x.cols()).map(|j| x.column(j)).collect(),
                }
            }),
            layers: NetworkDoc::from_network(&self.network).layers,
        }
    }

    pub fn from_doc(doc: &ModelDoc) -> AppResult<Self> {
        let network = NetworkDoc {
            layers: doc.layers.clone(),
        }
        .to_network()?;
        let d = doc.data_bounds.len();
        if d == 0 {
            return Err(AppError::config("model has no data bounds"));
        }
        let standardization = match &doc.standardization {
            Some(s) if s.mean.len() != d || s.std.len() != d => {
                return Err(AppError::config("standardization does not match the data dimension"))
            }
            Some(s) if s.std.iter().any(|&v| !(v > 0.0)) => {
                return Err(AppError::config("standardization scales must be positive"))
            }
            Some(s) => Some(Standardization {
                mean: s.mean.clone(),
                std: s.std.clone(),
            }),
            None => None,
        };
        let kernel = match &doc.kernel {
            Some(k) => {
                let kind = KernelSpec {
                    kind: k.kind,
                    gamma: k.gamma,
                }
                .kind()?;
                kind.validate()?;
                if k.train_x.iter().any(|p| p.len() != d) {
                    return Err(AppError::config("kernel training points do not match the data dimension"));
                }
                let n = k.train_x.len();
                let x = Matrix::from_fn(d, n, |i, j| k.train_x[j][i]);
                Some(KernelModel::build(kind, x)?)
            }
            None => None,
        };
        let input_dim = kernel.as_ref().map_or(d, KernelModel::input_dim);
        if network.input_dim() != input_dim {
            return Err(AppError::config(format!(
                "network input dimension {} does not match {input_dim}",
                network.input_dim()
            )));
        }
        Ok(Self {
            network,
            kernel,
            standardization,
            n_classes: doc.n_classes,
            data_bounds: doc.data_bounds.iter().map(|b| (b[0], b[1])).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        write_json(&self.to_doc(), path)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::input(path, e))?;
        let doc: ModelDoc =
            serde_json::from_str(&text).map_err(|e| AppError::config(format!("invalid model {}: {e}", path.display())))?;
        Self::from_doc(&doc)
    }
}

/// Per-feature `(min, max)` over the columns of `x`.
pub fn bounding_box(x: &Matrix) -> Vec<(f64, f64)> {
    (0..x.rows())
        .map(|i| {
            x.row(i)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardizationDoc {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDoc {
    pub kind: KernelName,
    pub gamma: Option<f64>,
    /// Standardized training points, one per entry.
    pub train_x: Vec<Vec<f64>>,
}

/// `model.json` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub n_classes: usize,
    pub data_bounds: Vec<[f64; 2]>,
    pub standardization: Option<StandardizationDoc>,
    pub kernel: Option<KernelDoc>,
    pub layers: Vec<LayerDoc>,
}
