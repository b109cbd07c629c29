//! Diagnostic label prediction from discomfort drawings with an
//! inter-battery topic model.
//!
//! The pipeline: drawings are quantized into location words
//! ([`featurize`]), labels are cleaned up ([`corpus`]), the two views are
//! modelled jointly ([`ibtm`]), and a trained model predicts labels for new
//! drawings ([`predict`]) or renders the typical drawing of a label
//! ([`generate`]).

pub mod corpus;
pub mod error;
pub mod featurize;
pub mod generate;
pub mod ibtm;
mod math;
pub mod pipeline;
pub mod predict;

pub use error::{Error, Result};
