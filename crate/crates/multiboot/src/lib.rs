//! Multi-seed bootstrap inference for model performance.
//!
//! Given per-example predictions from models trained with several pretraining
//! seeds (and optionally several fine-tuning runs per seed), this crate
//! resamples jointly over seeds and test examples to produce bootstrap
//! distributions of performance summaries. On top of those distributions it
//! builds percentile confidence intervals, one-sided p-values for paired,
//! unpaired, and fixed-baseline comparisons, per-example agreement analysis,
//! and a synthetic-data calibration harness that checks coverage and variance
//! consistency against known ground truth.

pub mod agreement;
pub mod cli;
pub mod engine;
pub mod error;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod model;
pub mod simulate;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
