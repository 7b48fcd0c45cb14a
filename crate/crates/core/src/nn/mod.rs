//! From-scratch recurrent classifier: LSTM cells, bidirectional layers,
//! batch normalization, dense head, cross-entropy, BPTT and Adam.
//!
//! Arithmetic is `f64` throughout; models are stored as `f32`.

pub mod batchnorm;
pub mod io;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod tensor;

use thiserror::Error;

pub use batchnorm::{batch_norm, BatchNormParams, BnMode};
pub use io::{load_model, save_model, SavedModel};
pub use loss::{cross_entropy, cross_entropy_frames, softmax};
pub use lstm::{bilstm_layer, lstm_cell_step, stack_time_major, Gate, LstmCellParams};
pub use model::{model_forward, Architecture, DenseParams, ForwardTrace, Head, LayerParams, ModelParams};
pub use optim::{adam_step, adam_step_model, gradient_clip, AdamConfig, AdamState};
pub use tensor::Tensor2;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("batch norm needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("trace does not match the model it is differentiated against")]
    StaleTrace,
    #[error("bad magic: not a model file")]
    BadMagic,
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("tensor shapes do not chain: {0}")]
    ShapeChainBroken(String),
    #[error("model file truncated")]
    TruncatedFile,
    #[error("bad model metadata: {0}")]
    Metadata(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
