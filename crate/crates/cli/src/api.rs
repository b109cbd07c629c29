//! Request and response bodies shared by `ibtm predict --json` and the HTTP
//! service, so both go through [`predict_response`].

use std::path::Path;

use anyhow::Context;
use ibtm::corpus::{DrawingPoint, View};
use ibtm::generate::SyntheticDrawing;
use ibtm::ibtm::{HyperParams, TrainedModel};
use ibtm::predict::predict;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A model plus the metadata reported with every response.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: TrainedModel,
    pub info: ModelInfo,
}

impl LoadedModel {
    pub fn new(model: TrainedModel) -> Self {
        let info = ModelInfo {
            k: model.config.k,
            training_id: model.training_id(),
        };
        Self { model, info }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
        let model = TrainedModel::from_bytes(&bytes).with_context(|| format!("loading model {}", path.display()))?;
        Ok(Self::new(model))
    }

    pub fn metadata(&self) -> ModelMetadata {
        let c = &self.model.config;
        ModelMetadata {
            k: c.k,
            t: c.t,
            s: c.s,
            v: c.v,
            l: c.l,
            training_id: self.info.training_id.clone(),
            sweeps: self.model.sweeps,
            final_elbo: self.model.elbo_trace.last().copied(),
            label_scale: self.model.label_scale,
            seed: c.seed,
            hyper: c.hyper.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub k: usize,
    pub training_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub alpha_s: f64,
    pub alpha_p1: f64,
    pub alpha_p2: f64,
    pub sigma_s1: f64,
    pub sigma_p1: f64,
    pub sigma_s2: f64,
    pub sigma_p2: f64,
    pub iota_1: [f64; 2],
    pub iota_2: [f64; 2],
}

impl From<HyperParams> for Hyper {
    fn from(h: HyperParams) -> Self {
        Self {
            alpha_s: h.alpha_s,
            alpha_p1: h.alpha_p1,
            alpha_p2: h.alpha_p2,
            sigma_s1: h.sigma_s1,
            sigma_p1: h.sigma_p1,
            sigma_s2: h.sigma_s2,
            sigma_p2: h.sigma_p2,
            iota_1: h.iota_1,
            iota_2: h.iota_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub k: usize,
    pub t: usize,
    pub s: usize,
    pub v: usize,
    pub l: usize,
    pub training_id: String,
    pub sweeps: usize,
    pub final_elbo: Option<f64>,
    pub label_scale: u32,
    pub seed: u64,
    pub hyper: Hyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub points: Vec<DrawingPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub view: View,
    pub x: f64,
    pub y: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Best first, `budget` entries unless the label vocabulary is smaller.
    pub labels: Vec<ScoredLabel>,
    pub budget: usize,
    pub regions: usize,
    pub clusters: Vec<Region>,
    pub bandwidth: f64,
    pub model: ModelInfo,
}

pub fn predict_response(model: &LoadedModel, points: &[DrawingPoint], bandwidth: f64) -> ibtm::Result<PredictResponse> {
    let p = predict(points, &model.model, bandwidth)?;
    Ok(PredictResponse {
        labels: p
            .ranked
            .into_iter()
            .map(|(label, score)| ScoredLabel { label, score })
            .collect(),
        budget: p.budget,
        regions: p.regions.n,
        clusters: p
            .regions
            .clusters
            .iter()
            .map(|m| Region {
                view: m.view,
                x: m.x,
                y: m.y,
                support: m.support,
            })
            .collect(),
        bandwidth,
        model: model.info.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateResponse {
    #[serde(flatten)]
    pub drawing: SyntheticDrawing,
    pub model: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn number(obj: &Map<String, Value>, key: &str, path: &str, errors: &mut Vec<FieldError>) -> Option<f64> {
    match obj.get(key) {
        None => {
            errors.push(FieldError::new(path, "missing"));
            None
        }
        Some(v) => match v.as_f64() {
            Some(x) => Some(x),
            None => {
                errors.push(FieldError::new(path, format!("expected a number, got {v}")));
                None
            }
        },
    }
}

fn point(value: &Value, i: usize, errors: &mut Vec<FieldError>) -> Option<DrawingPoint> {
    let at = |f: &str| format!("points[{i}].{f}");
    let Some(obj) = value.as_object() else {
        errors.push(FieldError::new(format!("points[{i}]"), "expected an object"));
        return None;
    };
    let before = errors.len();
    let view = match obj.get("view").and_then(Value::as_str) {
        Some("front") => Some(View::Front),
        Some("back") => Some(View::Back),
        Some(other) => {
            errors.push(FieldError::new(at("view"), format!("expected \"front\" or \"back\", got \"{other}\"")));
            None
        }
        None => {
            errors.push(FieldError::new(at("view"), "missing or not a string"));
            None
        }
    };
    let x = number(obj, "x", &at("x"), errors);
    let y = number(obj, "y", &at("y"), errors);
    let intensity = match obj.get("intensity") {
        None => Some(1.0),
        Some(_) => number(obj, "intensity", &at("intensity"), errors),
    };
    for key in obj.keys() {
        if !matches!(key.as_str(), "view" | "x" | "y" | "intensity") {
            errors.push(FieldError::new(at(key), "unknown field"));
        }
    }
    if errors.len() > before {
        return None;
    }
    let p = DrawingPoint {
        view: view?,
        x: x?,
        y: y?,
        intensity: intensity?,
    };
    if let Err(ibtm::Error::OutOfRange { field, value, range, .. }) = p.validate(0, i) {
        errors.push(FieldError::new(field, format!("{value} is outside {range}")));
        return None;
    }
    Some(p)
}

/// Checks a predict body field by field and collects every problem.
pub fn parse_predict_request(body: &Value) -> Result<PredictRequest, Vec<FieldError>> {
    let Some(obj) = body.as_object() else {
        return Err(vec![FieldError::new("", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    let mut points = Vec::new();
    match obj.get("points") {
        None => errors.push(FieldError::new("points", "missing")),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                if let Some(p) = point(item, i, &mut errors) {
                    points.push(p);
                }
            }
        }
        Some(_) => errors.push(FieldError::new("points", "expected an array")),
    }
    let bandwidth = match obj.get("bandwidth") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(b) if b.is_finite() && b > 0.0 => Some(b),
            _ => {
                errors.push(FieldError::new("bandwidth", format!("expected a positive number, got {v}")));
                None
            }
        },
    };
    for key in obj.keys() {
        if !matches!(key.as_str(), "points" | "bandwidth" | "id" | "labels") {
            errors.push(FieldError::new(key.clone(), "unknown field"));
        }
    }
    if errors.is_empty() {
        Ok(PredictRequest { points, bandwidth })
    } else {
        Err(errors)
    }
}

pub fn parse_generate_request(body: &Value) -> Result<GenerateRequest, Vec<FieldError>> {
    let Some(obj) = body.as_object() else {
        return Err(vec![FieldError::new("", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    let label = match obj.get("label") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => {
            errors.push(FieldError::new("label", format!("expected a string, got {v}")));
            None
        }
        None => {
            errors.push(FieldError::new("label", "missing"));
            None
        }
    };
    let top = match obj.get("top") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(n) if n > 0 => Some(n as usize),
            _ => {
                errors.push(FieldError::new("top", format!("expected a positive integer, got {v}")));
                None
            }
        },
    };
    for key in obj.keys() {
        if !matches!(key.as_str(), "label" | "top") {
            errors.push(FieldError::new(key.clone(), "unknown field"));
        }
    }
    match label {
        Some(label) if errors.is_empty() => Ok(GenerateRequest { label, top }),
        _ => Err(errors),
    }
}
