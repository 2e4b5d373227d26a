//! Calibration framework for low-cost sensors.
//!
//! A cheap linear branch and a high-accuracy recurrent/attention branch are
//! trained on refined sensor pairs; a sigmoid gate learns which branch each
//! input window needs, so inference runs at near-linear cost while tracking
//! deep-model accuracy. The numeric core is generic over the scalar type
//! ([`scalar::Scalar`]); the aliases below pin the two supported precisions.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod labels;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod series;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

/// 64-bit model (training, evaluation, verification).
pub type SendalModel64 = model::SendalModel<f64>;
/// 32-bit model (latency benchmarking, embedded-style inference).
pub type SendalModel32 = model::SendalModel<f32>;
pub type RefinedSeries64 = series::RefinedSeries<f64>;
pub type RefinedSeries32 = series::RefinedSeries<f32>;
