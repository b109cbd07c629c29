use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{DrawingPoint, View};
use crate::error::{Error, Result};

pub const DEFAULT_VOCAB_SIZE: usize = 256;
pub const DEFAULT_VIEW_OFFSET: f64 = 1.0;
pub const VOCAB_MAGIC: &[u8; 8] = b"IBTMVOC1";

const KMEANS_TOL: f64 = 1e-9;
const KMEANS_MAX_ITER: usize = 300;

/// K-means centroids over the embedded drawing plane. The centroid index is
/// the location word id.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationVocab {
    pub centroids: Vec<[f64; 2]>,
    pub view_offset: f64,
}

/// Sparse histogram of location words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BagOfWords {
    counts: BTreeMap<usize, u32>,
    total: u32,
}

impl BagOfWords {
    pub fn from_counts<I: IntoIterator<Item = (usize, u32)>>(counts: I) -> Self {
        let mut bag = Self::default();
        for (w, c) in counts {
            bag.add(w, c);
        }
        bag
    }

    pub fn add(&mut self, word: usize, count: u32) {
        if count == 0 {
            return;
        }
        *self.counts.entry(word).or_default() += count;
        self.total += count;
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, word: usize) -> u32 {
        self.counts.get(&word).copied().unwrap_or(0)
    }

    /// `(word, count)` pairs in ascending word order.
    pub fn entries(&self) -> Vec<(usize, u32)> {
        self.counts.iter().map(|(&w, &c)| (w, c)).collect()
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(*c, p);
        // strict comparison keeps the lowest index on ties
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

impl LocationVocab {
    pub fn new(centroids: Vec<[f64; 2]>) -> Self {
        Self {
            centroids,
            view_offset: DEFAULT_VIEW_OFFSET,
        }
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Back-view points are shifted right by `view_offset`.
    pub fn embed(&self, p: &DrawingPoint) -> [f64; 2] {
        match p.view {
            View::Front => [p.x, p.y],
            View::Back => [p.x + self.view_offset, p.y],
        }
    }

    /// Inverse of [`embed`](Self::embed); `x >= view_offset` is the back view.
    pub fn unembed(&self, c: [f64; 2]) -> (View, f64, f64) {
        if c[0] >= self.view_offset {
            (View::Back, c[0] - self.view_offset, c[1])
        } else {
            (View::Front, c[0], c[1])
        }
    }

    pub fn word_of(&self, p: &DrawingPoint) -> usize {
        nearest(&self.centroids, self.embed(p)).0
    }

    /// Centroid of `word` in drawing coordinates.
    pub fn location(&self, word: usize) -> (View, f64, f64) {
        self.unembed(self.centroids[word])
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        if self.view_offset != DEFAULT_VIEW_OFFSET {
            return Err(Error::InvalidArgument(format!(
                "vocabulary files assume view offset {DEFAULT_VIEW_OFFSET}, got {}",
                self.view_offset
            )));
        }
        out.write_all(VOCAB_MAGIC)?;
        out.write_all(&(self.centroids.len() as u32).to_le_bytes())?;
        for c in &self.centroids {
            out.write_all(&c[0].to_le_bytes())?;
            out.write_all(&c[1].to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(12 + 16 * self.len());
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |message: String| Error::Format {
            what: "vocabulary",
            message,
        };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != VOCAB_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let v = u32::from_le_bytes(b4) as usize;
        if v == 0 {
            return Err(bad("empty vocabulary".into()));
        }
        let mut centroids = Vec::with_capacity(v);
        let mut b8 = [0u8; 8];
        for _ in 0..v {
            input.read_exact(&mut b8)?;
            let x = f64::from_le_bytes(b8);
            input.read_exact(&mut b8)?;
            let y = f64::from_le_bytes(b8);
            if !x.is_finite() || !y.is_finite() {
                return Err(bad("non-finite centroid".into()));
            }
            centroids.push([x, y]);
        }
        Ok(Self::new(centroids))
    }
}

/// Seeds `k` centres with k-means++ (D² weighting).
fn kmeans_pp(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centres = Vec::with_capacity(k);
    centres.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            if target < d {
                pick = Some(i);
                break;
            }
            target -= d;
        }
        // rounding can exhaust `target`; fall back to the last candidate
        let pick = pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("distinct point"));
        let c = points[pick];
        centres.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(*p, c));
        }
    }
    centres
}

/// Lloyd iterations; returns final centroids and the objective after each
/// assignment step.
pub(crate) fn lloyd(
    points: &[[f64; 2]],
    mut centroids: Vec<[f64; 2]>,
    max_iter: usize,
    tol: f64,
) -> (Vec<[f64; 2]>, Vec<f64>) {
    let k = centroids.len();
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let assign: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centroids, *p)).collect();
        trace.push(assign.iter().map(|a| a.1).sum());
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, (c, _)) in points.iter().zip(&assign) {
            sums[*c][0] += p[0];
            sums[*c][1] += p[1];
            counts[*c] += 1;
        }
        let mut motion = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let n = counts[j] as f64;
            let next = [sums[j][0] / n, sums[j][1] / n];
            motion = motion.max(dist2(next, centroids[j]).sqrt());
            centroids[j] = next;
        }
        if motion < tol {
            break;
        }
    }
    let last = points.iter().map(|p| nearest(&centroids, *p).1).sum();
    trace.push(last);
    (centroids, trace)
}

/// Builds the location vocabulary with k-means++ seeded Lloyd iterations over
/// the embedded points of every training drawing.
pub fn build_location_vocab(points: &[DrawingPoint], size: usize, seed: u64) -> Result<LocationVocab> {
    if size == 0 {
        return Err(Error::InvalidArgument("vocabulary size must be at least 1".into()));
    }
    let mut vocab = LocationVocab::new(Vec::new());
    let embedded: Vec<[f64; 2]> = points.iter().map(|p| vocab.embed(p)).collect();
    let distinct: HashSet<[u64; 2]> = embedded
        .iter()
        .map(|p| [p[0].to_bits(), p[1].to_bits()])
        .collect();
    if distinct.len() < size {
        return Err(Error::TooFewPoints {
            needed: size,
            found: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_pp(&embedded, size, &mut rng);
    let (centroids, _) = lloyd(&embedded, init, KMEANS_MAX_ITER, KMEANS_TOL);
    vocab.centroids = centroids;
    Ok(vocab)
}

/// Quantizes each point to its nearest centroid. Intensity is ignored.
pub fn encode_drawing(points: &[DrawingPoint], vocab: &LocationVocab) -> Result<BagOfWords> {
    if points.is_empty() {
        return Err(Error::EmptyDrawing);
    }
    let mut bag = BagOfWords::default();
    for p in points {
        bag.add(vocab.word_of(p), 1);
    }
    Ok(bag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn front(x: f64, y: f64) -> DrawingPoint {
        DrawingPoint::new(View::Front, x, y)
    }

    #[test]
    fn k_equals_n_reproduces_points() {
        let pts: Vec<_> = (0..12)
            .map(|i| front((i % 4) as f64 / 4.0, (i / 4) as f64 / 3.0))
            .collect();
        let vocab = build_location_vocab(&pts, 12, 3).unwrap();
        let mut got: Vec<_> = vocab.centroids.clone();
        let mut want: Vec<_> = pts.iter().map(|p| [p.x, p.y]).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        let err: f64 = pts.iter().map(|p| nearest(&vocab.centroids, vocab.embed(p)).1).sum();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn separated_pairs() {
        let mut pts = vec![front(0.0, 0.0); 10];
        pts.extend(vec![front(1.0, 1.0); 10]);
        let vocab = build_location_vocab(&pts, 2, 11).unwrap();
        let mut c = vocab.centroids.clone();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(c, vec![[0.0, 0.0], [1.0, 1.0]]);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![front(0.5, 0.5); 40];
        assert!(matches!(
            build_location_vocab(&pts, 2, 0),
            Err(Error::TooFewPoints { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn back_view_is_offset() {
        let pts = vec![front(0.5, 0.5), DrawingPoint::new(View::Back, 0.5, 0.5)];
        let vocab = build_location_vocab(&pts, 2, 0).unwrap();
        let views: HashSet<_> = (0..2).map(|w| vocab.location(w).0).collect();
        assert_eq!(views.len(), 2);
        let (view, x, y) = vocab.location(vocab.word_of(&pts[1]));
        assert_eq!((view, x, y), (View::Back, 0.5, 0.5));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                let v = if rng.random::<bool>() { View::Front } else { View::Back };
                DrawingPoint::new(v, rng.random(), rng.random())
            })
            .collect();
        let a = build_location_vocab(&pts, 32, 7).unwrap();
        let b = build_location_vocab(&pts, 32, 7).unwrap();
        let bits = |v: &LocationVocab| -> Vec<u64> {
            v.centroids.iter().flat_map(|c| [c[0].to_bits(), c[1].to_bits()]).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn single_point_encodes_to_its_centroid() {
        let vocab = LocationVocab::new((0..10).map(|i| [i as f64 / 10.0, 0.5]).collect());
        let bag = encode_drawing(&[front(0.7, 0.5)], &vocab).unwrap();
        assert_eq!(bag.entries(), vec![(7, 1)]);
        assert_eq!(bag.total(), 1);
        assert!(matches!(encode_drawing(&[], &vocab), Err(Error::EmptyDrawing)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // centroids 2 and 5 mirror each other around x = 0.5
        let mut c = vec![[0.0, 0.0]; 6];
        c[2] = [0.25, 0.5];
        c[5] = [0.75, 0.5];
        c[0] = [0.0, 0.0];
        c[1] = [0.0, 1.0];
        c[3] = [1.0, 0.0];
        c[4] = [1.0, 1.0];
        let vocab = LocationVocab::new(c);
        let p = front(0.5, 0.5);
        // independent check: both distances equal
        assert_eq!(dist2([0.25, 0.5], [0.5, 0.5]), dist2([0.75, 0.5], [0.5, 0.5]));
        assert_eq!(vocab.word_of(&p), 2);
    }

    #[test]
    fn vocab_file_round_trip() {
        let vocab = LocationVocab::new(vec![[0.1, 0.2], [1.3, 0.9]]);
        let bytes = vocab.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"IBTMVOC1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 12 + 32);
        assert_eq!(LocationVocab::read_from(bytes.as_slice()).unwrap(), vocab);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(LocationVocab::read_from(bad.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn encode_conserves_mass(pts in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, any::<bool>()), 1..200)) {
            let vocab = LocationVocab::new((0..16).map(|i| [(i % 4) as f64 / 2.0, (i / 4) as f64 / 3.0]).collect());
            let pts: Vec<_> = pts.into_iter()
                .map(|(x, y, b)| DrawingPoint::new(if b { View::Back } else { View::Front }, x, y))
                .collect();
            let bag = encode_drawing(&pts, &vocab).unwrap();
            prop_assert_eq!(bag.total() as usize, pts.len());
            prop_assert_eq!(bag.entries().iter().map(|e| e.1 as usize).sum::<usize>(), pts.len());
            prop_assert!(bag.entries().iter().all(|e| e.0 < vocab.len()));
        }

        #[test]
        fn lloyd_objective_nonincreasing(seed in 0u64..1000, k in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<[f64; 2]> = (0..150).map(|_| [rng.random::<f64>() * 2.0, rng.random()]).collect();
            let init = kmeans_pp(&pts, k, &mut rng);
            let (_, trace) = lloyd(&pts, init, 100, 0.0);
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{:?}", w);
            }
        }
    }
}
