use std::io;

use thiserror::Error;

/// Errors produced anywhere in the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: field `{field}` = {value} is out of range {range}")]
    OutOfRange {
        line: usize,
        field: String,
        value: f64,
        range: &'static str,
    },

    #[error("duplicate document id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("label map line {line}: {message}")]
    LabelMap { line: usize, message: String },

    #[error("no training labels in corpus")]
    EmptyLabelSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} distinct points to build a vocabulary, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("drawing has no points")]
    EmptyDrawing,

    #[error("{kind} token id {id} is outside vocabulary of size {size}")]
    TokenOutOfRange {
        kind: &'static str,
        id: usize,
        size: usize,
    },

    #[error("non-finite value in {what} during sweep {sweep}")]
    NonFinite { what: &'static str, sweep: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("corpus too small to split: {0} documents")]
    TooSmallToSplit(usize),

    #[error("bad {what} file: {message}")]
    Format { what: &'static str, message: String },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
