//! The typical drawing of a diagnostic label: infer topic proportions from
//! the label alone, then show the most probable location words.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::corpus::View;
use crate::error::{Error, Result};
use crate::ibtm::{e_step_document, DocPosterior, DocTokens, TrainedModel};

pub const DEFAULT_TOP_LOCATIONS: usize = 10;

/// Builtin body outline, one `view<TAB>path data` row per path.
pub const BUILTIN_CONTOUR: &str = include_str!("../data/contour.tsv");

const PANEL_W: f64 = 200.0;
const PANEL_H: f64 = 400.0;
const GAP: f64 = 20.0;
const RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratedLocation {
    pub view: View,
    pub x: f64,
    pub y: f64,
    /// Probability relative to the most probable location, in `(0, 1]`.
    pub weight: f64,
    pub word: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticDrawing {
    pub label: String,
    /// Descending weight.
    pub locations: Vec<GeneratedLocation>,
}

/// Topic posterior of a label with no drawing. The label token carries the
/// multiplicity used in training.
pub fn infer_from_label(label: &str, model: &TrainedModel) -> Result<DocPosterior> {
    let index = model
        .label_vocab
        .get(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let tokens = DocTokens::new(Vec::new(), vec![(index, model.label_scale.max(1))]);
    e_step_document(&tokens, &model.globals, &model.config.hyper)
}

/// `p(w) = Σ_k θ̄_k β̄_{k,w}` over the shared topics only.
pub fn word_distribution(posterior: &DocPosterior, model: &TrainedModel) -> Vec<f64> {
    let theta = posterior.theta_mean();
    let beta = model.globals.expected_beta();
    (0..beta.cols())
        .map(|w| theta.iter().enumerate().map(|(k, t)| t * beta.get(k, w)).sum())
        .collect()
}

/// The `n_top` most probable location words mapped back to body
/// coordinates. The label field is left empty.
pub fn top_locations(posterior: &DocPosterior, model: &TrainedModel, n_top: usize) -> SyntheticDrawing {
    let p = word_distribution(posterior, model);
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order.truncate(n_top);
    let max = order.first().map_or(1.0, |&w| p[w]);
    let locations = order
        .into_iter()
        .map(|w| {
            let (view, x, y) = model.location_vocab.location(w);
            GeneratedLocation {
                view,
                x,
                y,
                weight: if max > 0.0 { p[w] / max } else { 0.0 },
                word: w,
            }
        })
        .collect();
    SyntheticDrawing {
        label: String::new(),
        locations,
    }
}

/// [`infer_from_label`] followed by [`top_locations`].
pub fn generate(label: &str, model: &TrainedModel, n_top: usize) -> Result<SyntheticDrawing> {
    let post = infer_from_label(label, model)?;
    let mut drawing = top_locations(&post, model, n_top);
    drawing.label = model.label_vocab.label(model.label_vocab.get(label).expect("checked")).to_string();
    Ok(drawing)
}

/// Body outline paths for both views in the unit square of each panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub paths: Vec<(View, String)>,
}

impl Contour {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CONTOUR).expect("builtin contour parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut paths = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (view, d) = line.split_once('\t').ok_or_else(|| Error::Format {
                what: "contour",
                message: format!("line {}: expected view<TAB>path", i + 1),
            })?;
            let view = match view.trim() {
                "front" => View::Front,
                "back" => View::Back,
                other => {
                    return Err(Error::Format {
                        what: "contour",
                        message: format!("line {}: unknown view {other:?}", i + 1),
                    })
                }
            };
            if d.contains(['<', '>', '"', '&']) {
                return Err(Error::Format {
                    what: "contour",
                    message: format!("line {}: path data contains markup", i + 1),
                });
            }
            paths.push((view, d.trim().to_string()));
        }
        if paths.is_empty() {
            return Err(Error::Format {
                what: "contour",
                message: "no paths".into(),
            });
        }
        Ok(Self { paths })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn panel_x(view: View) -> f64 {
    match view {
        View::Front => 0.0,
        View::Back => PANEL_W + GAP,
    }
}

/// Two-panel SVG: the contour, then one circle per location in drawing
/// order with fill opacity equal to its weight.
pub fn render_heatmap(drawing: &SyntheticDrawing, contour: &Contour) -> String {
    let width = 2.0 * PANEL_W + GAP;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}">"#
    );
    let title = drawing
        .label
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;");
    let _ = writeln!(svg, "<title>{title}</title>");
    for (view, d) in &contour.paths {
        let _ = writeln!(
            svg,
            r##"<path class="contour {}" transform="translate({} 0) scale({PANEL_W} {PANEL_H})" d="{d}" fill="none" stroke="#555555" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"##,
            view.as_str(),
            panel_x(*view),
        );
    }
    for loc in &drawing.locations {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{RADIUS}" fill="#d62728" fill-opacity="{:.4}"/>"##,
            panel_x(loc.view) + loc.x * PANEL_W,
            loc.y * PANEL_H,
            loc.weight,
        );
    }
    svg.push_str("</svg>\n");
    svg
}
