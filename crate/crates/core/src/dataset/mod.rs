//! Manifests, stratified folds, class balancing and dataset materialization.

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::color::ColorError;
use crate::image::ImageIoError;

pub mod augment;
pub mod balance;
pub mod manifest;
pub mod materialize;
pub mod provenance;
pub mod split;

pub use augment::{AugError, Sample, WarpSettings};
pub use balance::{
    balance, balance_oversample, balance_partition, AugKind, BalancePlan, BalanceStrategy, BalanceSubset, PlanEntry, PlannedAug,
};
pub use manifest::{Label, Manifest, SampleRecord};
pub use materialize::{
    fit_pca_from_manifest, materialize, training_records, AugmentOps, MaterializeOptions, MaterializePlan, MaterializeReport, Skip,
};
pub use provenance::{AugStep, Provenance};
pub use split::{stratified_kfold, FoldPlan};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid id {0:?}: use only letters, digits, '.', '_' and '-'")]
    BadId(String),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("fold count must be at least 2, got {0}")]
    BadK(usize),
    #[error("class {label} has {have} samples, need at least {need}")]
    TooFewSamples { label: Label, have: usize, need: usize },
    #[error("class {0} has no samples")]
    EmptyClass(Label),
    #[error("color augmentation requested without a PCA model")]
    MissingPcaModel,
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
