//! Corpus data model and the newline-delimited corpus file format.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"format":"ibtm-corpus","version":1,"language":"sv"}
//! {"id":"p001","points":[{"view":"front","x":0.41,"y":0.62,"intensity":0.8}],"labels":["Lumbago"]}
//! ```
//!
//! The header line is optional. Coordinates are fractions of the body
//! contour's width and height, with `y = 0` at the top of the head.

mod labels;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use labels::{
    normalize_label_text, normalize_labels, scale_label_counts, split_bilateral, LabelMaps,
    LabelVocab, LabelCounts, BUILTIN_EXCHANGEABLE, BUILTIN_SINGULAR, BUILTIN_SV_EN,
};

use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "ibtm-corpus";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Front,
    Back,
}

impl View {
    pub const ALL: [View; 2] = [View::Front, View::Back];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Back => "back",
        }
    }
}

/// One shaded sample on the body contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawingPoint {
    pub view: View,
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

impl DrawingPoint {
    pub fn new(view: View, x: f64, y: f64) -> Self {
        Self {
            view,
            x,
            y,
            intensity: 1.0,
        }
    }

    /// Checks coordinate and intensity ranges. `line` is only used for the
    /// error report.
    pub fn validate(&self, line: usize, index: usize) -> Result<()> {
        let check = |name: &str, v: f64, ok: bool, range: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    line,
                    field: format!("points[{index}].{name}"),
                    value: v,
                    range,
                })
            }
        };
        check("x", self.x, (0.0..=1.0).contains(&self.x), "[0, 1]")?;
        check("y", self.y, (0.0..=1.0).contains(&self.y), "[0, 1]")?;
        check(
            "intensity",
            self.intensity,
            self.intensity > 0.0 && self.intensity <= 1.0,
            "(0, 1]",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub points: Vec<DrawingPoint>,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Sv,
    En,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<Language>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub language: Option<Language>,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self {
            language: None,
            documents,
        }
    }

    /// Number of documents (`M`).
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Applies label preprocessing to every document. The translation
    /// dictionary is only consulted for corpora declared as Swedish.
    pub fn normalized(&self, maps: &LabelMaps) -> Corpus {
        let maps = if self.language == Some(Language::Sv) {
            maps.clone()
        } else {
            maps.without_translation()
        };
        Corpus {
            language: self.language,
            documents: self
                .documents
                .iter()
                .map(|d| Document {
                    id: d.id.clone(),
                    points: d.points.clone(),
                    labels: normalize_labels(&d.labels, &maps),
                })
                .collect(),
        }
    }
}

/// Reads a corpus from newline-delimited records.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        if first && value.get("format").is_some() {
            first = false;
            let header: Header = serde_json::from_value(value).map_err(|e| Error::Malformed {
                line: lineno,
                message: format!("header: {e}"),
            })?;
            if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
                return Err(Error::Malformed {
                    line: lineno,
                    message: format!(
                        "unsupported corpus format {} version {}",
                        header.format, header.version
                    ),
                });
            }
            corpus.language = header.language;
            continue;
        }
        first = false;
        let doc: Document = serde_json::from_value(value).map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        for (j, p) in doc.points.iter().enumerate() {
            p.validate(lineno, j)?;
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: lineno,
            });
        }
        corpus.documents.push(doc);
    }
    if corpus.documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Writes the header line followed by one record per document.
pub fn serialize_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        language: corpus.language,
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for doc in &corpus.documents {
        serde_json::to_writer(&mut out, doc).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
