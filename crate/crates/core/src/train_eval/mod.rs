//! Dataset manifests, stratified splits, the training loop, evaluation
//! reports and whole-clip prediction.

pub mod dataset;
pub mod evaluate;
pub mod manifest;
pub mod predict;
pub mod split;
pub mod train;

use thiserror::Error;

use crate::audio_io::AudioError;
use crate::features::FeatureError;
use crate::nn::NnError;

pub use dataset::{load_feature_dir, Example, FeatureIndexRow, SegmentRecord, INDEX_FILE};
pub use evaluate::{argmax, evaluate, f1_score, EvalReport};
pub use manifest::{default_labels, load_manifest, DatasetManifest, ManifestEntry};
pub use predict::{majority_vote, predict, ClipPrediction};
pub use split::{stratified_split, Split, SplitAssignment, DEFAULT_FRACTIONS};
pub use train::{fit, fit_with, score, train, train_with, EpochRecord, TrainConfig, TrainHistory, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainEvalError {
    #[error("line {line}: unknown genre '{genre}'")]
    UnknownGenre { line: usize, genre: String },
    #[error("line {line}: duplicate path '{path}'")]
    DuplicatePath { line: usize, path: String },
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("genre '{genre}' has {count} recordings, at least 3 are needed to split")]
    GenreTooSmall { genre: String, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no features for {0}")]
    MissingFeatures(String),
    #[error("label set mismatch: {0}")]
    LabelMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> TrainEvalError + '_ {
    move |source| TrainEvalError::Io {
        path: path.display().to_string(),
        source,
    }
}
