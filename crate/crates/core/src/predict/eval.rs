use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{f_measure, predict};
use crate::corpus::{Corpus, Document, LabelMaps, LabelVocab};
use crate::error::{Error, Result};
use crate::ibtm::TrainedModel;
use crate::pipeline::{fit, FitSettings};

/// How the best of several training seeds is chosen per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Highest training score (the ELBO for the topic model).
    #[default]
    Elbo,
    /// Highest held-out F. Optimistic: the test half picks the seed.
    TestF,
}

impl Selection {
    pub fn as_str(self) -> &'static str {
        match self {
            Selection::Elbo => "elbo",
            Selection::TestF => "test-f",
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elbo" => Ok(Selection::Elbo),
            "test-f" | "testf" => Ok(Selection::TestF),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection rule {other:?} (expected elbo or test-f)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Protocol {
    pub n_splits: usize,
    pub n_seeds: usize,
    pub selection: Selection,
    /// Base seed: split `i` shuffles with a stream derived from it, and
    /// training seeds are `seed, seed + 1, ...`.
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            n_splits: 10,
            n_seeds: 10,
            selection: Selection::Elbo,
            seed: 0,
        }
    }
}

/// Anything that can be trained on labeled documents and then suggest
/// labels for a document's drawing.
pub trait Predictor: Sync {
    type Model: Send + Sync;

    /// Fits on the training half. The returned score ranks seeds under
    /// [`Selection::Elbo`]; higher is better.
    fn fit(&self, train: &Corpus, seed: u64) -> Result<(Self::Model, f64)>;

    fn predict(&self, model: &Self::Model, doc: &Document) -> Result<Vec<String>>;
}

/// Echoes the true labels back.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    type Model = ();

    fn fit(&self, _train: &Corpus, _seed: u64) -> Result<((), f64)> {
        Ok(((), 0.0))
    }

    fn predict(&self, _model: &(), doc: &Document) -> Result<Vec<String>> {
        Ok(doc.labels.clone())
    }
}

/// Picks `budget` distinct labels uniformly from the training labels.
#[derive(Debug, Clone, Copy)]
pub struct RandomPredictor {
    pub budget: usize,
    pub seed: u64,
}

impl Predictor for RandomPredictor {
    type Model = Vec<String>;

    fn fit(&self, train: &Corpus, _seed: u64) -> Result<(Vec<String>, f64)> {
        let vocab = LabelVocab::from_labels(train.documents.iter().flat_map(|d| d.labels.iter()));
        Ok((vocab.labels().to_vec(), 0.0))
    }

    fn predict(&self, labels: &Vec<String>, doc: &Document) -> Result<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from(crc32fast::hash(doc.id.as_bytes())));
        Ok(labels.choose_multiple(&mut rng, self.budget).cloned().collect())
    }
}

/// The topic model behind the full drawing-to-labels pipeline.
#[derive(Debug, Clone)]
pub struct IbtmPredictor {
    pub settings: FitSettings,
    pub bandwidth: f64,
}

impl Predictor for IbtmPredictor {
    type Model = TrainedModel;

    fn fit(&self, train: &Corpus, seed: u64) -> Result<(TrainedModel, f64)> {
        let mut settings = self.settings.clone();
        settings.model.seed = seed;
        let model = fit(train, &settings)?;
        let score = model.elbo_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        Ok((model, score))
    }

    fn predict(&self, model: &TrainedModel, doc: &Document) -> Result<Vec<String>> {
        if doc.points.is_empty() {
            return Ok(Vec::new());
        }
        Ok(predict(&doc.points, model, self.bandwidth)?
            .ranked
            .into_iter()
            .map(|(l, _)| l)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocScore {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub split: usize,
    /// The selected training seed.
    pub seed: u64,
    /// Macro F over the scored test documents.
    pub f: f64,
    pub docs: Vec<DocScore>,
    /// `(seed, training score, macro F)` of every candidate seed.
    pub candidates: Vec<(u64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    /// Shared topic count, when the predictor has one.
    pub k: Option<usize>,
    pub splits: Vec<SplitResult>,
    pub mean: f64,
    /// Population standard deviation of the per-split F.
    pub std: f64,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        format!("F = {:.4} ± {:.4}", self.mean, self.std)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.k.map_or_else(|| "-".to_string(), |k| k.to_string());
        writeln!(
            f,
            "# K={k} splits={} seeds={} selection={}",
            self.protocol.n_splits,
            self.protocol.n_seeds,
            self.protocol.selection.as_str()
        )?;
        writeln!(f, "split\tseed\tF")?;
        for s in &self.splits {
            writeln!(f, "{}\t{}\t{:.4}", s.split, s.seed, s.f)?;
        }
        writeln!(f, "{}", self.summary())
    }
}

fn split_indices(n: usize, split: usize, base: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(split as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let test = idx.split_off(n / 2);
    (idx, test)
}

fn subset(corpus: &Corpus, idx: &[usize]) -> Corpus {
    Corpus {
        language: corpus.language,
        documents: idx.iter().map(|&i| corpus.documents[i].clone()).collect(),
    }
}

fn score_test<P: Predictor>(predictor: &P, model: &P::Model, test: &Corpus) -> Result<(f64, Vec<DocScore>)> {
    let mut docs = Vec::new();
    for d in test.documents.iter().filter(|d| !d.labels.is_empty()) {
        let s = f_measure(&predictor.predict(model, d)?, &d.labels);
        docs.push(DocScore {
            id: d.id.clone(),
            precision: s.precision,
            recall: s.recall,
            f: s.f,
        });
    }
    let macro_f = if docs.is_empty() {
        0.0
    } else {
        docs.iter().map(|d| d.f).sum::<f64>() / docs.len() as f64
    };
    Ok((macro_f, docs))
}

/// Repeated random 50/50 splits. For each split every training seed is fitted
/// on the first half and scored on the second half (documents without true
/// labels are not scored); the selection rule picks one seed per split. The
/// corpus is used as given, so labels should already be normalized.
pub fn evaluate_with<P: Predictor>(corpus: &Corpus, predictor: &P, protocol: &Protocol) -> Result<EvalReport> {
    if corpus.len() < 2 {
        return Err(Error::TooSmallToSplit(corpus.len()));
    }
    if protocol.n_splits == 0 || protocol.n_seeds == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one split and one seed".into()));
    }
    let splits = (0..protocol.n_splits)
        .into_par_iter()
        .map(|split| {
            let (train_idx, test_idx) = split_indices(corpus.len(), split, protocol.seed);
            let (train, test) = (subset(corpus, &train_idx), subset(corpus, &test_idx));
            let mut best: Option<(f64, u64, f64, Vec<DocScore>)> = None;
            let mut candidates = Vec::with_capacity(protocol.n_seeds);
            for j in 0..protocol.n_seeds {
                let seed = protocol.seed.wrapping_add(j as u64);
                let (model, score) = predictor.fit(&train, seed)?;
                let (f, docs) = score_test(predictor, &model, &test)?;
                candidates.push((seed, score, f));
                let key = match protocol.selection {
                    Selection::Elbo => score,
                    Selection::TestF => f,
                };
                if best.as_ref().is_none_or(|b| key > b.0) {
                    best = Some((key, seed, f, docs));
                }
            }
            let (_, seed, f, docs) = best.expect("at least one seed");
            Ok(SplitResult {
                split,
                seed,
                f,
                docs,
                candidates,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = splits.len() as f64;
    let mean = splits.iter().map(|s| s.f).sum::<f64>() / n;
    let std = (splits.iter().map(|s| (s.f - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalReport {
        protocol: *protocol,
        k: None,
        splits,
        mean,
        std,
    })
}

/// The evaluation protocol with the topic model: labels are normalized once
/// with `settings.maps`, then every fit uses the normalized labels as is.
pub fn evaluate(corpus: &Corpus, settings: &FitSettings, bandwidth: f64, protocol: &Protocol) -> Result<EvalReport> {
    let normalized = corpus.normalized(&settings.maps);
    let predictor = IbtmPredictor {
        settings: FitSettings {
            maps: LabelMaps::empty(),
            ..settings.clone()
        },
        bandwidth,
    };
    let mut report = evaluate_with(&normalized, &predictor, protocol)?;
    report.k = Some(settings.model.k);
    Ok(report)
}
