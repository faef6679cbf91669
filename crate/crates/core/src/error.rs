use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{context}: expected shape {expected:?}, found {found:?}")]
    Shape {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("value {value} at index {index} is outside the {activation} inverse domain (bound {bound})")]
    Domain {
        activation: &'static str,
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("cross-entropy requires positive activations, found {value} at index {index}")]
    NonPositiveActivation { index: usize, value: f64 },

    #[error("kernel diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("row {row} has zero variance")]
    ZeroVariance { row: usize },

    #[error("label {label} at position {index} is outside [0, {n_classes})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("layer index {layer} outside 1..={n_layers}")]
    LayerIndex { layer: usize, n_layers: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}, layer {layer}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        layer: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(&'static str),
}
