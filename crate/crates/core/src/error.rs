use std::path::PathBuf;

use thiserror::Error;

use crate::graphs::GraphError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{what}: expected width {expected}, got {got}")]
    Width { what: &'static str, expected: usize, got: usize },
    #[error("{what}: row counts differ ({left} vs {right})")]
    Rows { what: &'static str, left: usize, right: usize },
    #[error("non-finite attention scores in block {block}")]
    NonFiniteScores { block: usize },
    #[error("non-edge weight must lie in (0, 1], got {0}")]
    EdgeWeight(f64),
    #[error("mutual information estimate needs at least 2 pairs, got {0}")]
    MiBatch(usize),
    #[error("readout of a graph with no nodes")]
    EmptyReadout,
    #[error("empty batch")]
    EmptyBatch,
    #[error("no paired training examples")]
    NoPairedData,
    #[error("need at least 2 unpaired source graphs, got {0}")]
    TooFewUnpaired(usize),
    #[error("non-finite training loss {0}")]
    NonFiniteLoss(f64),
    #[error("dataset holds no training graphs")]
    EmptyDataset,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
