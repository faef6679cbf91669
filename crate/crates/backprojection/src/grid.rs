//! Decision-boundary grids over a 2-D input rectangle.

use std::io::Write;

use backprojection_core::Matrix;

use crate::error::{AppError, AppResult};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl Bounds {
    /// Bounding box widened by `fraction` of its extent on every side.
    pub fn padded(bbox: &[(f64, f64)], fraction: f64) -> AppResult<Self> {
        if bbox.len() != 2 {
            return Err(unsupported(bbox.len()));
        }
        let pad = |(lo, hi): (f64, f64)| {
            let w = (hi - lo) * fraction;
            (lo - w, hi + w)
        };
        Ok(Self {
            x1: pad(bbox[0]),
            x2: pad(bbox[1]),
        })
    }

    /// Parses `x1_min,x1_max,x2_min,x2_max`.
    pub fn parse(text: &str) -> AppResult<Self> {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| AppError::config(format!("bad bounds {text:?}")))?;
        if v.len() != 4 || v.iter().any(|x| !x.is_finite()) || v[0] > v[1] || v[2] > v[3] {
            return Err(AppError::config(format!(
                "bounds must be four finite numbers x1_min,x1_max,x2_min,x2_max, got {text:?}"
            )));
        }
        Ok(Self {
            x1: (v[0], v[1]),
            x2: (v[2], v[3]),
        })
    }
}

fn unsupported(d: usize) -> AppError {
    AppError::config(format!("decision grids need a 2-D input space, model has {d} dimensions"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub x1: f64,
    pub x2: f64,
    pub predicted_class: usize,
    pub outputs: Vec<f64>,
}

fn ticks((lo, hi): (f64, f64), resolution: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution).map(move |i| if i + 1 == resolution { hi } else { lo + step * i as f64 })
}

/// Evaluates the model on a `resolution x resolution` lattice covering `bounds`,
/// corners included. Rows run over `x1` within each `x2`.
pub fn decision_grid(model: &Model, bounds: &Bounds, resolution: usize) -> AppResult<Vec<GridRow>> {
    if model.data_dim() != 2 {
        return Err(unsupported(model.data_dim()));
    }
    if resolution < 2 {
        return Err(AppError::config("grid resolution must be at least 2"));
    }
    let mut coords = Vec::with_capacity(resolution * resolution);
    for x2 in ticks(bounds.x2, resolution) {
        for x1 in ticks(bounds.x1, resolution) {
            coords.push((x1, x2));
        }
    }
    let points = Matrix::from_fn(2, coords.len(), |i, j| if i == 0 { coords[j].0 } else { coords[j].1 });
    let outputs = model.outputs(&points)?;
    let classes = model.classify(&outputs);
    Ok(coords
        .into_iter()
        .zip(classes)
        .enumerate()
        .map(|(j, ((x1, x2), predicted_class))| GridRow {
            x1,
            x2,
            predicted_class,
            outputs: outputs.column(j),
        })
        .collect())
}

/// CSV with header `x1,x2,predicted_class,output_1..output_p`.
pub fn write_grid<W: Write>(rows: &[GridRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = rows.first().map_or(0, |r| r.outputs.len());
    let mut header = vec!["x1".to_string(), "x2".into(), "predicted_class".into()];
    header.extend((1..=p).map(|i| format!("output_{i}")));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.x1.to_string(), row.x2.to_string(), row.predicted_class.to_string()];
        record.extend(row.outputs.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Builds the grid and writes it as CSV.
pub fn export_decision_grid<W: Write>(model: &Model, bounds: &Bounds, resolution: usize, out: W) -> AppResult<usize> {
    let rows = decision_grid(model, bounds, resolution)?;
    write_grid(&rows, out).map_err(|e| AppError::io("<grid>", std::io::Error::other(e)))?;
    Ok(rows.len())
}
