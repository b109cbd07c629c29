//! Shared inputs for the benchmarks.

use ibtm::corpus::DrawingPoint;
use ibtm::ibtm::synth::{SyntheticCorpus, SyntheticSpec};

/// The default synthetic corpus (K=5, T=2, S=2, V=50, 500 documents).
pub fn corpus() -> SyntheticCorpus {
    SyntheticSpec::default().generate().expect("valid default spec")
}

/// Every drawing point of the corpus.
pub fn all_points(c: &SyntheticCorpus) -> Vec<DrawingPoint> {
    c.corpus.documents.iter().flat_map(|d| d.points.iter().copied()).collect()
}
