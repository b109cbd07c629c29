//! Location featurization: drawings become bags of K-means location words,
//! and mean shift counts the distinct discomfort regions of a drawing.

mod regions;
mod vocab;

pub use regions::{
    count_regions, label_budget, RegionCount, RegionMode, DEFAULT_BANDWIDTH, MAX_LABELS,
    MIN_LABELS,
};
pub use vocab::{
    build_location_vocab, encode_drawing, BagOfWords, LocationVocab, DEFAULT_VIEW_OFFSET,
    DEFAULT_VOCAB_SIZE, VOCAB_MAGIC,
};
