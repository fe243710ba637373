//! Overlap-angle optimization for a constant-flow parallel micropump.
//!
//! The crate models the pump's feature space (viscosity, working pressure,
//! plunger speed, check-valve flow), fits a Gaussian RBF network to predict
//! the overlap angle that cancels the shifting-point pressure pulse, and
//! ships a synthetic plant so the whole pipeline — dataset generation,
//! hybrid unsupervised/supervised training, calibration replay, and the
//! benchmark comparison — runs reproducibly without the physical rig.
//!
//! Modules follow the pipeline order:
//!
//! - [`pump`]: deterministic flow model and correction constants
//! - [`rbf`]: the network, its forward pass, and model files
//! - [`cluster`]: joint-space k-means and kernel widths
//! - [`train`]: loss, analytic gradients, least squares, Adam
//! - [`plant`]: the synthetic ground truth and angle sweeps
//! - [`dataset`]: labeled data generation and the CSV format
//! - [`calibrate`]: correction-constant recovery against a dispenser
//! - [`pipeline`]: end-to-end training orchestration
//! - [`report`]: the per-cluster benchmark comparison
//! - [`bench`]: one-call benchmark runs with artifact output
//! - [`config`]: the JSON run configuration

pub mod bench;
pub mod calibrate;
pub mod cluster;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod plant;
pub mod pump;
pub mod rbf;
pub mod report;
pub mod train;

pub use error::{Error, Result};
