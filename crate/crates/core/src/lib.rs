//! Measurable parts of detection-driven zero-shot captioning.
//!
//! - [`embeddings`]: word vectors and class-to-class similarity embeddings
//! - [`scoring`]: compatibility scores, unseen-class scaling, entropy
//!   calibration loss and scale fitting
//! - [`detection`]: matching, AP/mAP, harmonic mean, false-positive diagnosis
//! - [`caption`]: METEOR, V-METEOR and per-class F1
//! - [`pipeline`]: record-level glue used by the command-line front end

pub mod caption;
pub mod detection;
pub mod embeddings;
pub mod error;
mod linalg;
pub mod pipeline;
pub mod records;
pub mod scoring;
pub mod vocab;

pub use error::{Error, Result};
