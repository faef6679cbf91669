//! Dataset CSV and network / model JSON.

use std::io::{Read, Write};
use std::path::Path;

use backprojection_core::{ActivationKind, Dataset, Layer, LayerSpec, LossKind, Matrix, Network};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Writes `x1..xd,label` with a header row, one sample per line.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for j in 0..data.len() {
        let mut row: Vec<String> = data.x.column(j).iter().map(|v| v.to_string()).collect();
        row.push(data.labels[j].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv(data: &Dataset, path: &Path) -> AppResult<()> {
    let file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    write_dataset(data, file).map_err(|e| AppError::io(path, csv_io(e)))
}

/// Reads the [`write_dataset`] layout. The class count is one more than the largest label.
pub fn read_dataset<R: Read>(input: R) -> AppResult<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| AppError::config(format!("dataset header: {e}")))?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["label".into()]).collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(AppError::config(format!(
            "dataset header must be {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut columns: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| AppError::config(format!("dataset row {}: {e}", line + 1)))?;
        for field in record.iter().take(d) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| AppError::config(format!("dataset row {}: bad number {field:?}", line + 1)))?;
            columns.push(v);
        }
        let label = record[d]
            .trim()
            .parse()
            .map_err(|_| AppError::config(format!("dataset row {}: bad label {:?}", line + 1, &record[d])))?;
        labels.push(label);
    }
    let n = labels.len();
    if n == 0 {
        return Err(AppError::config("dataset has no rows"));
    }
    // columns holds samples back to back; transpose into d x n.
    let x = Matrix::from_fn(d, n, |i, j| columns[j * d + i]);
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Ok(Dataset::new(x, labels, n_classes)?)
}

pub fn read_dataset_csv(path: &Path) -> AppResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| AppError::input(path, e))?;
    read_dataset(file)
}

fn csv_io(err: csv::Error) -> std::io::Error {
    std::io::Error::other(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: String,
    pub loss: String,
    /// Row-major `in_dim x out_dim`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub layers: Vec<LayerDoc>,
}

impl NetworkDoc {
    pub fn from_network(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerDoc {
                in_dim: l.spec.in_dim,
                out_dim: l.spec.out_dim,
                activation: l.spec.activation.name().into(),
                loss: l.spec.loss.name().into(),
                weights: l.weights.as_slice().to_vec(),
            })
            .collect();
        Self { layers }
    }

    pub fn to_network(&self) -> AppResult<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for doc in &self.layers {
            let activation: ActivationKind = doc.activation.parse()?;
            let loss: LossKind = doc.loss.parse()?;
            let weights = Matrix::from_row_major(doc.in_dim, doc.out_dim, doc.weights.clone())?;
            layers.push(Layer {
                spec: LayerSpec {
                    in_dim: doc.in_dim,
                    out_dim: doc.out_dim,
                    activation,
                    loss,
                },
                weights,
            });
        }
        Ok(Network::new(layers)?)
    }
}

pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkDoc::from_network(net)).expect("network serializes")
}

pub fn network_from_json(text: &str) -> AppResult<Network> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| AppError::config(format!("invalid network: {e}")))?;
    doc.to_network()
}

/// Serializes with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}
