//! Event curves from temporal feature sequences, a small curve-conditioned
//! rectified-flow generator, and audio-visual synchronization metrics.

pub mod cli;
pub mod curve;
pub mod error;
pub mod features;
pub mod flow;
pub mod metrics;
pub mod plot;
pub mod stats;

pub use error::{Error, Result};
