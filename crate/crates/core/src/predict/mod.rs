//! Label prediction for unlabeled drawings and the split/seed evaluation
//! protocol.

mod eval;

pub use eval::{
    evaluate, evaluate_with, DocScore, EvalReport, IbtmPredictor, OraclePredictor, Predictor, Protocol, RandomPredictor,
    Selection, SplitResult,
};

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::DrawingPoint;
use crate::error::Result;
use crate::featurize::{count_regions, encode_drawing, label_budget, BagOfWords, RegionCount};
use crate::ibtm::{e_step_document, DocPosterior, DocTokens, GlobalTopics, HyperParams, TrainedModel};

/// Ranked label suggestions for one drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `(label, score)` by descending score, `min(budget, L)` entries.
    pub ranked: Vec<(String, f64)>,
    pub budget: usize,
    pub regions: RegionCount,
}

impl Prediction {
    pub fn labels(&self) -> Vec<&str> {
        self.ranked.iter().map(|(l, _)| l.as_str()).collect()
    }
}

/// Topic posterior of a drawing alone; the label view is left empty. An
/// empty bag yields the prior.
pub fn infer_heldout(bag: &BagOfWords, globals: &GlobalTopics, hyper: &HyperParams) -> Result<DocPosterior> {
    e_step_document(&DocTokens::new(bag.entries(), Vec::new()), globals, hyper)
}

/// Every label index with its score `Σ_k θ̄_k η̄_{k,v}`, best first; equal
/// scores keep index order.
pub fn rank_labels(posterior: &DocPosterior, globals: &GlobalTopics) -> Vec<(usize, f64)> {
    let theta = posterior.theta_mean();
    let eta = globals.expected_eta();
    let mut scores: Vec<(usize, f64)> = (0..eta.cols())
        .map(|v| (v, theta.iter().enumerate().map(|(k, t)| t * eta.get(k, v)).sum()))
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores
}

/// Full prediction pipeline: quantize, infer, rank, and cut the ranking at
/// the region-based label budget.
pub fn predict(points: &[DrawingPoint], model: &TrainedModel, bandwidth: f64) -> Result<Prediction> {
    let bag = encode_drawing(points, &model.location_vocab)?;
    let regions = count_regions(points, bandwidth)?;
    let budget = label_budget(regions.n);
    let posterior = infer_heldout(&bag, &model.globals, &model.config.hyper)?;
    let ranked = rank_labels(&posterior, &model.globals)
        .into_iter()
        .take(budget)
        .map(|(v, s)| (model.label_vocab.label(v).to_string(), s))
        .collect();
    Ok(Prediction { ranked, budget, regions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Precision, recall and their harmonic mean over label sets. Duplicates are
/// ignored; an empty side gives zero.
pub fn f_measure<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], truth: &[T]) -> FScore {
    let p: BTreeSet<&str> = predicted.iter().map(|s| s.as_ref()).collect();
    let t: BTreeSet<&str> = truth.iter().map(|s| s.as_ref()).collect();
    let hits = p.intersection(&t).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { hits / p.len() as f64 };
    let recall = if t.is_empty() { 0.0 } else { hits / t.len() as f64 };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    FScore { precision, recall, f }
}
