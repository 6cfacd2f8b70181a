//! Dense `f64` matrices, a reverse-mode tape, Adam, and checkpoint files.

mod adam;
mod checkpoint;
mod gradcheck;
mod init;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamHyper, AdamSlot};
pub use checkpoint::{Checkpoint, Manifest, TensorEntry, FORMAT as CHECKPOINT_FORMAT};
pub use gradcheck::{check_gradients, GradCheck};
pub use init::{glorot_bound, glorot_uniform};
pub use params::{ParamBinder, ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape { op: &'static str, left: [usize; 2], right: [usize; 2] },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: [usize; 2], len: usize },
    #[error("concat axis {axis} out of range for 2-d tensors")]
    ConcatAxis { axis: usize },
    #[error("concat of zero tensors")]
    EmptyConcat,
    #[error("column slice {start}..{end} out of range for {cols} columns")]
    SliceRange { start: usize, end: usize, cols: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowIndex { index: usize, rows: usize },
    #[error("reduction over an empty tensor")]
    EmptyReduction,
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NotScalar { shape: [usize; 2] },
    #[error("backward on an empty tape")]
    EmptyTape,
    #[error("variable belongs to a different tape")]
    ForeignVar,
    #[error("learning rate must be positive and finite, got {0}")]
    LearningRate(f64),
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("optimizer state missing for parameter #{param}")]
    MissingState { param: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
