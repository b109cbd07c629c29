//! Diagnostic label preprocessing: translation, exchangeable-term mapping,
//! bilateral splitting, and the label vocabulary.

use std::collections::{BTreeMap, HashMap};

use super::Corpus;
use crate::error::{Error, Result};

pub const BUILTIN_EXCHANGEABLE: &str = include_str!("../../data/exchangeable.tsv");
pub const BUILTIN_SV_EN: &str = include_str!("../../data/sv_en.tsv");
pub const BUILTIN_SINGULAR: &str = include_str!("../../data/singular.tsv");

const BILATERAL: &str = "B";
const SIDES: [&str; 2] = ["L", "R"];

/// Collapses whitespace runs and trims. Case is preserved.
pub fn normalize_label_text(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fold(label: &str) -> String {
    normalize_label_text(label).to_lowercase()
}

/// Case-insensitive string mapping loaded from a two-column TSV.
#[derive(Debug, Clone, Default, PartialEq)]
struct TermMap {
    entries: HashMap<String, String>,
}

impl TermMap {
    fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, String> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let err = |message: String| Error::LabelMap {
                line: i + 1,
                message,
            };
            if cols.len() != 2 {
                return Err(err(format!("expected 2 tab-separated columns, found {}", cols.len())));
            }
            let alias = normalize_label_text(cols[0]);
            let canonical = normalize_label_text(cols[1]);
            if alias.is_empty() || canonical.is_empty() {
                return Err(err("empty column".into()));
            }
            let key = alias.to_lowercase();
            match entries.get(&key) {
                Some(prev) if prev.to_lowercase() != canonical.to_lowercase() => {
                    return Err(err(format!(
                        "`{alias}` maps to both `{prev}` and `{canonical}`"
                    )));
                }
                Some(_) => {}
                None => {
                    entries.insert(key, canonical);
                }
            }
        }
        let map = Self { entries };
        map.check_idempotent()?;
        Ok(map)
    }

    /// A canonical term may only map to itself; this also rules out cycles.
    fn check_idempotent(&self) -> Result<()> {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        for key in keys {
            let canonical = &self.entries[key];
            let cf = canonical.to_lowercase();
            if let Some(next) = self.entries.get(&cf) {
                if next.to_lowercase() != cf {
                    return Err(Error::LabelMap {
                        line: 0,
                        message: format!(
                            "canonical `{canonical}` is itself an alias of `{next}`"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn get(&self, label: &str) -> Option<&str> {
        self.entries.get(&fold(label)).map(String::as_str)
    }

    /// Looks up the whole label, then the label with a leading side marker
    /// (`L`, `R`, `B`) stripped, in which case the marker is kept.
    fn apply(&self, label: &str) -> String {
        if let Some(hit) = self.get(label) {
            return hit.to_string();
        }
        if let Some((marker, rest)) = label.split_once(' ') {
            if marker == BILATERAL || SIDES.contains(&marker) {
                if let Some(hit) = self.get(rest) {
                    return format!("{marker} {hit}");
                }
            }
        }
        label.to_string()
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Label rewriting tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMaps {
    exchangeable: TermMap,
    translation: TermMap,
    singular: TermMap,
}

impl LabelMaps {
    /// Tables shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            exchangeable: TermMap::parse(BUILTIN_EXCHANGEABLE).expect("builtin exchangeable map"),
            translation: TermMap::parse(BUILTIN_SV_EN).expect("builtin dictionary"),
            singular: TermMap::parse(BUILTIN_SINGULAR).expect("builtin singular table"),
        }
    }

    /// Only identity mappings: normalization reduces to whitespace cleanup,
    /// bilateral splitting and deduplication.
    pub fn empty() -> Self {
        Self {
            exchangeable: TermMap::default(),
            translation: TermMap::default(),
            singular: TermMap::parse(BUILTIN_SINGULAR).expect("builtin singular table"),
        }
    }

    /// Builtin dictionary and singular table with a custom exchangeable map.
    pub fn with_exchangeable_tsv(text: &str) -> Result<Self> {
        let mut maps = Self::builtin();
        maps.exchangeable = TermMap::parse(text)?;
        Ok(maps)
    }

    pub fn from_tsv(exchangeable: &str, translation: &str, singular: &str) -> Result<Self> {
        Ok(Self {
            exchangeable: TermMap::parse(exchangeable)?,
            translation: TermMap::parse(translation)?,
            singular: TermMap::parse(singular)?,
        })
    }

    pub fn without_translation(&self) -> Self {
        Self {
            translation: TermMap::default(),
            ..self.clone()
        }
    }

    pub fn exchangeable_len(&self) -> usize {
        self.exchangeable.len()
    }

    pub fn translation_len(&self) -> usize {
        self.translation.len()
    }
}

fn singularize(rest: &str, table: &TermMap) -> String {
    rest.split(' ')
        .map(|tok| match table.get(tok) {
            Some(s) => {
                let upper = tok.chars().next().is_some_and(char::is_uppercase);
                if upper {
                    let mut c = s.chars();
                    c.next()
                        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                        .unwrap_or_default()
                } else {
                    s.to_string()
                }
            }
            None => tok.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_with(label: &str, singular: &TermMap) -> Vec<String> {
    let label = normalize_label_text(label);
    match label.split_once(' ') {
        Some((BILATERAL, rest)) => {
            let rest = singularize(rest, singular);
            SIDES.iter().map(|side| format!("{side} {rest}")).collect()
        }
        _ => vec![label],
    }
}

/// Splits a bilateral (`B ...`) label into its left and right forms.
///
/// ```
/// use ibtm::corpus::split_bilateral;
/// assert_eq!(
///     split_bilateral("B hands discomfort"),
///     vec!["L hand discomfort", "R hand discomfort"]
/// );
/// assert_eq!(split_bilateral("Lumbago"), vec!["Lumbago"]);
/// ```
pub fn split_bilateral(label: &str) -> Vec<String> {
    thread_local! {
        static SINGULAR: TermMap = TermMap::parse(BUILTIN_SINGULAR).expect("builtin singular table");
    }
    SINGULAR.with(|t| split_with(label, t))
}

/// Translate, map exchangeable terms to their canonical form, split
/// bilateral labels, then drop case-insensitive duplicates keeping the first.
pub fn normalize_labels<S: AsRef<str>>(labels: &[S], maps: &LabelMaps) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for label in labels {
        let label = normalize_label_text(label.as_ref());
        if label.is_empty() {
            continue;
        }
        let translated = maps.translation.apply(&label);
        let exchanged = maps.exchangeable.apply(&translated);
        for l in split_with(&exchanged, &maps.singular) {
            if seen.insert(l.to_lowercase()) {
                out.push(l);
            }
        }
    }
    out
}

/// Sparse per-document label counts keyed by label index.
pub type LabelCounts = Vec<(usize, u32)>;

/// Multiplies every label token count by `factor`.
pub fn scale_label_counts(counts: &[(usize, u32)], factor: u32) -> Result<LabelCounts> {
    if factor == 0 {
        return Err(Error::InvalidArgument("label scale factor must be at least 1".into()));
    }
    Ok(counts.iter().map(|&(l, c)| (l, c * factor)).collect())
}

/// Bijection between label strings and `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocab {
    /// Builds from an explicit list. Case-insensitive duplicates collapse to
    /// the lexicographically smallest spelling; order is by folded label.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut by_key: BTreeMap<String, String> = BTreeMap::new();
        for l in labels {
            let l = normalize_label_text(l.as_ref());
            if l.is_empty() {
                continue;
            }
            let key = l.to_lowercase();
            by_key
                .entry(key)
                .and_modify(|cur| {
                    if l < *cur {
                        *cur = l.clone();
                    }
                })
                .or_insert(l);
        }
        let labels: Vec<String> = by_key.into_values().collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_lowercase(), i))
            .collect();
        Self { labels, index }
    }

    /// All labels of an already normalized corpus.
    pub fn build(corpus: &Corpus) -> Result<Self> {
        let vocab = Self::from_labels(corpus.documents.iter().flat_map(|d| d.labels.iter()));
        if vocab.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(&fold(label)).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Unit counts for every label present in the vocabulary; unknown labels
    /// are skipped.
    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> LabelCounts {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for l in labels {
            if let Some(i) = self.get(l.as_ref()) {
                *counts.entry(i).or_default() += 1;
            }
        }
        counts.into_iter().collect()
    }
}
