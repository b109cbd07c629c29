//! Synthetic corpora drawn from known, peaked topic distributions. Each
//! topic's location words sit in one compact blob on the body plane so that
//! sampled drawings have a known region structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::HyperParams;
use super::globals::TopicMatrix;
use super::sampler::{sample_document, SampledDocument, TopicDistributions};
use crate::corpus::{Corpus, Document, DrawingPoint, Language};
use crate::error::{Error, Result};
use crate::featurize::LocationVocab;

const WORD_SPACING: f64 = 0.012;
const POINT_JITTER: f64 = 0.002;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub t: usize,
    pub s: usize,
    pub v: usize,
    pub l: usize,
    pub docs: usize,
    pub words_per_doc: usize,
    pub labels_per_doc: usize,
    /// Probability mass each topic puts on its own block of tokens.
    pub peak: f64,
    /// Hyperparameters of the generating process.
    pub hyper: HyperParams,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            k: 5,
            t: 2,
            s: 2,
            v: 50,
            l: 20,
            docs: 500,
            words_per_doc: 60,
            labels_per_doc: 3,
            peak: 0.99,
            hyper: HyperParams {
                alpha_s: 0.1,
                alpha_p1: 0.1,
                alpha_p2: 0.1,
                iota_1: [4.0, 1.0],
                iota_2: [9.0, 1.0],
                ..HyperParams::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub truth: TopicDistributions,
    pub vocab: LocationVocab,
    pub label_names: Vec<String>,
    pub samples: Vec<SampledDocument>,
    pub corpus: Corpus,
}

/// Splits `0..n` into `parts` contiguous, nearly equal blocks. With fewer
/// items than parts, block `i` is `{i % n}`.
pub fn blocks(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    if n >= parts {
        (0..parts)
            .map(|i| (i * n / parts)..((i + 1) * n / parts))
            .collect()
    } else {
        (0..parts).map(|i| (i % n)..(i % n + 1)).collect()
    }
}

/// Rows `0..shared` then `shared..shared+private`; each row puts `peak` on its
/// block and spreads the rest uniformly.
pub fn peaked_rows(shared: usize, private: usize, cols: usize, peak: f64) -> (TopicMatrix, TopicMatrix) {
    let bl = blocks(cols, shared + private);
    let row = |b: &std::ops::Range<usize>| -> Vec<f64> {
        let base = (1.0 - peak) / cols as f64;
        let on = peak / b.len() as f64;
        (0..cols).map(|c| base + if b.contains(&c) { on } else { 0.0 }).collect()
    };
    let s = TopicMatrix::from_rows(bl[..shared].iter().map(row).collect(), cols);
    let p = TopicMatrix::from_rows(bl[shared..].iter().map(row).collect(), cols);
    (s, p)
}

/// Blob centres on a grid over the embedded plane `[0,2]×[0,1]`.
fn blob_centres(n: usize) -> Vec<[f64; 2]> {
    let cols = ((2 * n) as f64).sqrt().ceil().max(2.0) as usize;
    let cols = cols + cols % 2;
    let rows = n.div_ceil(cols).max(1);
    (0..n)
        .map(|i| {
            let (c, r) = (i % cols, i / cols);
            [2.0 * (c as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64]
        })
        .collect()
}

/// Location vocabulary whose word blocks (as laid out by [`blocks`]) form
/// compact blobs.
pub fn blob_vocab(v: usize, n_blocks: usize) -> LocationVocab {
    let centres = blob_centres(n_blocks);
    let mut centroids = vec![[0.0; 2]; v];
    let mut placed = vec![false; v];
    for (b, range) in blocks(v, n_blocks).into_iter().enumerate() {
        let m = range.len();
        let side = (m as f64).sqrt().ceil() as usize;
        for (j, w) in range.enumerate() {
            if placed[w] {
                continue;
            }
            let (gx, gy) = ((j % side) as f64, (j / side) as f64);
            let half = (side as f64 - 1.0) / 2.0;
            centroids[w] = [
                centres[b][0] + (gx - half) * WORD_SPACING,
                centres[b][1] + (gy - half) * WORD_SPACING,
            ];
            placed[w] = true;
        }
    }
    LocationVocab::new(centroids)
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.v == 0 || self.l == 0 || self.docs == 0 {
            return Err(Error::InvalidArgument("synthetic K, V, L and docs must be positive".into()));
        }
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return Err(Error::InvalidArgument("peak must lie in (0, 1]".into()));
        }
        self.hyper.validate()
    }

    pub fn truth(&self) -> TopicDistributions {
        let (beta, zeta) = peaked_rows(self.k, self.t, self.v, self.peak);
        let (eta, tau) = peaked_rows(self.k, self.s, self.l, self.peak);
        TopicDistributions { beta, zeta, eta, tau }
    }

    pub fn label_names(&self) -> Vec<String> {
        let width = self.l.to_string().len().max(2);
        (0..self.l).map(|i| format!("label_{i:0width$}")).collect()
    }

    /// Samples the corpus; points are word centroids with small Gaussian
    /// jitter, labels are the distinct sampled label names.
    pub fn generate(&self) -> Result<SyntheticCorpus> {
        self.validate()?;
        let truth = self.truth();
        let vocab = blob_vocab(self.v, self.k + self.t);
        let names = self.label_names();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let jitter = Normal::new(0.0, POINT_JITTER).expect("valid sd");
        let mut samples = Vec::with_capacity(self.docs);
        let mut documents = Vec::with_capacity(self.docs);
        let width = self.docs.to_string().len().max(4);
        for i in 0..self.docs {
            let doc = sample_document(&truth, self.words_per_doc, self.labels_per_doc, &self.hyper, &mut rng)?;
            let points = doc
                .words
                .iter()
                .map(|&w| {
                    let (view, x, y) = vocab.location(w);
                    DrawingPoint {
                        view,
                        x: (x + jitter.sample(&mut rng)).clamp(0.0, 1.0),
                        y: (y + jitter.sample(&mut rng)).clamp(0.0, 1.0),
                        intensity: rng.random_range(0.5..=1.0),
                    }
                })
                .collect();
            let labels = doc.distinct_labels().into_iter().map(|l| names[l].clone()).collect();
            documents.push(Document {
                id: format!("syn{i:0width$}"),
                points,
                labels,
            });
            samples.push(doc);
        }
        Ok(SyntheticCorpus {
            truth,
            vocab,
            label_names: names,
            samples,
            corpus: Corpus {
                language: Some(Language::En),
                documents,
            },
        })
    }
}

/// Drawing points for a bag of words placed exactly on their centroids.
pub fn points_for_words(words: &[usize], vocab: &LocationVocab) -> Vec<DrawingPoint> {
    words
        .iter()
        .map(|&w| {
            let (view, x, y) = vocab.location(w);
            DrawingPoint::new(view, x.clamp(0.0, 1.0), y.clamp(0.0, 1.0))
        })
        .collect()
}
