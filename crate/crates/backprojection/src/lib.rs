//! File formats, experiment runner, timing, and CLI for `backprojection-core`.
//!
//! An experiment is described by an [`config::ExperimentConfig`] JSON document,
//! resolved against its dataset, trained, and written out as `loss_curve.csv`,
//! `report.json`, and `model.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod gradcheck;
pub mod grid;
pub mod model;
pub mod timing;

pub use config::{Algorithm, ExperimentConfig, ResolvedConfig};
pub use error::{AppError, AppResult};
pub use experiment::{run_experiment, Outcome};
pub use grid::{export_decision_grid, Bounds};
pub use model::Model;
pub use timing::{epoch_timing_comparison, TimingSetup, TimingTable};
