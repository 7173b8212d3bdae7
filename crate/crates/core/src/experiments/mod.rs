//! Datasets, IDX ingestion and the three experiment protocols: width sweep,
//! penalty sweep and the Lipschitz/gap correlation run.

mod data;
mod idx;
pub mod plot;
mod stats;
mod sweep;

pub use data::{gen_blobs_dataset, gen_linear_dataset, gen_sin_dataset, Dataset, Provenance, Targets};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use stats::{box_stats, mean, quantile, spearman, BoxStats};
pub use sweep::{
    blob_fallback_dataset, derive_seed, lip_gap_run, sweep_lambda, sweep_width, LambdaSweepConfig, LipGapConfig, LipGapResult, SweepPoint,
    SweepResult, SweepSummary, WidthSweepConfig, BLOB_DIM, BLOB_SEPARATION,
};

use thiserror::Error;

use crate::model::ModelError;
use crate::training::TrainError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("idx file {path}: wrong magic {found:#010x}, expected {expected:#010x}")]
    WrongMagic { path: String, expected: u32, found: u32 },
    #[error("idx file {path}: truncated, expected {expected} bytes, found {found}")]
    Truncated { path: String, expected: usize, found: usize },
    #[error("idx files disagree on sample count: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
