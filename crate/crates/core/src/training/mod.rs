//! Objective, staged optimization and run bookkeeping.

pub mod config;
pub mod objective;
pub mod report;
pub mod session;

pub use config::{Epochs, TrainConfig};
pub use objective::{estimator_objective, full_objective, global_pairs, Batch, GraphItem, PairedItem, Tally, Weights};
pub use report::{records_csv, EpochRecord, Phase, CSV_HEADER};
pub use session::{train, Session};
