//! End-to-end fitting: raw corpus in, [`TrainedModel`] out.

use crate::corpus::{scale_label_counts, Corpus, LabelMaps, LabelVocab};
use crate::error::{Error, Result};
use crate::featurize::{build_location_vocab, encode_drawing, LocationVocab, DEFAULT_VOCAB_SIZE};
use crate::ibtm::{train_with, DocTokens, ModelConfig, TrainedModel};

/// Label tokens are repeated this many times so the label view is not
/// drowned out by the much longer location view.
pub const DEFAULT_LABEL_SCALE: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    /// Topic counts, hyperparameters and training controls. `v` and `l` are
    /// replaced by the sizes of the vocabularies built from the corpus.
    pub model: ModelConfig,
    pub vocab_size: usize,
    pub label_scale: u32,
    pub maps: LabelMaps,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            vocab_size: DEFAULT_VOCAB_SIZE,
            label_scale: DEFAULT_LABEL_SCALE,
            maps: LabelMaps::builtin(),
        }
    }
}

/// Token counts of every document of an already normalized corpus.
pub fn encode_corpus(corpus: &Corpus, locations: &LocationVocab, labels: &LabelVocab, label_scale: u32) -> Result<Vec<DocTokens>> {
    corpus
        .documents
        .iter()
        .map(|d| {
            let words = if d.points.is_empty() {
                Vec::new()
            } else {
                encode_drawing(&d.points, locations)?.entries()
            };
            let labels = scale_label_counts(&labels.encode(&d.labels), label_scale)?;
            Ok(DocTokens::new(words, labels))
        })
        .collect()
}

pub fn fit(corpus: &Corpus, settings: &FitSettings) -> Result<TrainedModel> {
    fit_with(corpus, settings, |_, _| {})
}

/// Normalizes labels, builds both vocabularies, encodes and scales the
/// tokens, then trains. `on_sweep` sees every sweep's ELBO.
pub fn fit_with<F: FnMut(usize, f64)>(corpus: &Corpus, settings: &FitSettings, on_sweep: F) -> Result<TrainedModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let corpus = corpus.normalized(&settings.maps);
    let points: Vec<_> = corpus.documents.iter().flat_map(|d| d.points.iter().copied()).collect();
    let location_vocab = build_location_vocab(&points, settings.vocab_size, settings.model.seed)?;
    let label_vocab = LabelVocab::build(&corpus)?;
    let docs = encode_corpus(&corpus, &location_vocab, &label_vocab, settings.label_scale)?;
    let mut config = settings.model.clone();
    config.v = location_vocab.len();
    config.l = label_vocab.len();
    let out = train_with(&docs, &config, on_sweep)?;
    Ok(TrainedModel {
        config,
        location_vocab,
        label_vocab,
        sweeps: out.sweeps,
        elbo_trace: out.elbo_trace,
        globals: out.globals,
        label_scale: settings.label_scale,
    })
}
