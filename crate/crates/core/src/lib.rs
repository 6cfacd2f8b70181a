//! Semi-supervised graph-to-graph translation with separate source and target
//! embedding spaces joined by a learned translator.

pub mod decoder;
pub mod encoder;
mod error;
pub mod evaluation;
pub mod graphs;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;
pub mod translator;

pub use error::{Error, Result};
