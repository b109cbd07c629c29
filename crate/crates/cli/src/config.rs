//! Run configuration: a plain `key = value` file layered under command-line
//! flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ibtm::corpus::LabelMaps;
use ibtm::featurize::{DEFAULT_BANDWIDTH, DEFAULT_VOCAB_SIZE};
use ibtm::generate::DEFAULT_TOP_LOCATIONS;
use ibtm::ibtm::synth::SyntheticSpec;
use ibtm::ibtm::{HyperParams, ModelConfig};
use ibtm::pipeline::{FitSettings, DEFAULT_LABEL_SCALE};
use ibtm::predict::{Protocol, Selection};

pub const DEFAULT_PORT: u16 = 8080;

/// Every setting any command reads. Unset paths stay `None`; everything else
/// has a default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub maps: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub t: usize,
    pub s: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub tol: f64,
    pub init_jitter: f64,
    /// Hyperparameter assignments in the order they were given; applied on
    /// top of a command-specific base.
    pub hyper: Vec<(String, String)>,
    pub vocab_size: usize,
    pub scale: u32,
    pub bandwidth: f64,
    pub splits: usize,
    pub seeds: usize,
    pub selection: Selection,
    pub label: Option<String>,
    pub top: usize,
    pub port: u16,
    pub docs: usize,
    pub v: usize,
    pub l: usize,
    pub words_per_doc: usize,
    pub labels_per_doc: usize,
    pub peak: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let synth = SyntheticSpec::default();
        let protocol = Protocol::default();
        Self {
            corpus: None,
            maps: None,
            model: None,
            out: None,
            k: model.k,
            t: model.t,
            s: model.s,
            seed: model.seed,
            max_sweeps: model.max_sweeps,
            tol: model.elbo_rel_tol,
            init_jitter: model.init_jitter,
            hyper: Vec::new(),
            vocab_size: DEFAULT_VOCAB_SIZE,
            scale: DEFAULT_LABEL_SCALE,
            bandwidth: DEFAULT_BANDWIDTH,
            splits: protocol.n_splits,
            seeds: protocol.n_seeds,
            selection: protocol.selection,
            label: None,
            top: DEFAULT_TOP_LOCATIONS,
            port: DEFAULT_PORT,
            docs: synth.docs,
            v: synth.v,
            l: synth.l,
            words_per_doc: synth.words_per_doc,
            labels_per_doc: synth.labels_per_doc,
            peak: synth.peak,
        }
    }
}

const HYPER_KEYS: &[&str] = &[
    "alpha", "alpha_s", "alpha_p1", "alpha_p2", "sigma", "sigma_s1", "sigma_p1", "sigma_s2", "sigma_p2", "iota",
    "iota_1", "iota_2",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

fn parse_pair(key: &str, value: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([parse_num(key, a)?, parse_num(key, b)?]),
        _ => bail!("`{key}`: expected two comma-separated numbers, got `{value}`"),
    }
}

impl RunConfig {
    /// Reads a configuration file on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    /// `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            self.set(key.trim(), value.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    /// Assigns one setting. Dashes and underscores in keys are equivalent.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let path = || Some(PathBuf::from(value));
        match key.as_str() {
            "corpus" => self.corpus = path(),
            "maps" => self.maps = path(),
            "model" => self.model = path(),
            "out" => self.out = path(),
            "k" => self.k = parse_num(&key, value)?,
            "t" => self.t = parse_num(&key, value)?,
            "s" => self.s = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "max_sweeps" => self.max_sweeps = parse_num(&key, value)?,
            "tol" => self.tol = parse_num(&key, value)?,
            "init_jitter" => self.init_jitter = parse_num(&key, value)?,
            "vocab_size" => self.vocab_size = parse_num(&key, value)?,
            "scale" => self.scale = parse_num(&key, value)?,
            "bandwidth" => self.bandwidth = parse_num(&key, value)?,
            "splits" => self.splits = parse_num(&key, value)?,
            "seeds" => self.seeds = parse_num(&key, value)?,
            "selection" => self.selection = value.parse().map_err(|e| anyhow!("`selection`: {e}"))?,
            "label" => self.label = Some(value.to_string()),
            "top" => self.top = parse_num(&key, value)?,
            "port" => self.port = parse_num(&key, value)?,
            "docs" => self.docs = parse_num(&key, value)?,
            "v" => self.v = parse_num(&key, value)?,
            "l" => self.l = parse_num(&key, value)?,
            "words_per_doc" => self.words_per_doc = parse_num(&key, value)?,
            "labels_per_doc" => self.labels_per_doc = parse_num(&key, value)?,
            "peak" => self.peak = parse_num(&key, value)?,
            k if HYPER_KEYS.contains(&k) => {
                apply_hyper(&mut HyperParams::default(), k, value)?;
                self.hyper.push((k.to_string(), value.to_string()));
            }
            _ => bail!("unknown setting `{key}`"),
        }
        Ok(())
    }

    /// `base` with every hyperparameter assignment applied in order.
    pub fn hyper_params(&self, base: HyperParams) -> Result<HyperParams> {
        let mut h = base;
        for (k, v) in &self.hyper {
            apply_hyper(&mut h, k, v)?;
        }
        h.validate()?;
        Ok(h)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut m = ModelConfig::new(self.k, self.t, self.s, 1, 1);
        m.hyper = self.hyper_params(m.hyper)?;
        m.max_sweeps = self.max_sweeps;
        m.elbo_rel_tol = self.tol;
        m.init_jitter = self.init_jitter;
        m.seed = self.seed;
        m.validate()?;
        Ok(m)
    }

    pub fn label_maps(&self) -> Result<LabelMaps> {
        match &self.maps {
            None => Ok(LabelMaps::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading maps {}", p.display()))?;
                Ok(LabelMaps::with_exchangeable_tsv(&text)?)
            }
        }
    }

    pub fn fit_settings(&self) -> Result<FitSettings> {
        if self.vocab_size == 0 {
            bail!("vocab_size must be positive");
        }
        if self.scale == 0 {
            bail!("scale must be positive");
        }
        Ok(FitSettings {
            model: self.model_config()?,
            vocab_size: self.vocab_size,
            label_scale: self.scale,
            maps: self.label_maps()?,
        })
    }

    pub fn checked_bandwidth(&self) -> Result<f64> {
        if self.bandwidth.is_finite() && self.bandwidth > 0.0 {
            Ok(self.bandwidth)
        } else {
            bail!("bandwidth must be positive, got {}", self.bandwidth)
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        if self.splits == 0 || self.seeds == 0 {
            bail!("splits and seeds must be positive");
        }
        Ok(Protocol {
            n_splits: self.splits,
            n_seeds: self.seeds,
            selection: self.selection,
            seed: self.seed,
        })
    }

    /// Synthetic corpus settings. Hyperparameter assignments apply on top of
    /// the sparse generating defaults.
    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let base = SyntheticSpec::default();
        let spec = SyntheticSpec {
            k: self.k,
            t: self.t,
            s: self.s,
            v: self.v,
            l: self.l,
            docs: self.docs,
            words_per_doc: self.words_per_doc,
            labels_per_doc: self.labels_per_doc,
            peak: self.peak,
            hyper: self.hyper_params(base.hyper)?,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn apply_hyper(h: &mut HyperParams, key: &str, value: &str) -> Result<()> {
    match key {
        "alpha" => {
            let a = parse_num(key, value)?;
            (h.alpha_s, h.alpha_p1, h.alpha_p2) = (a, a, a);
        }
        "alpha_s" => h.alpha_s = parse_num(key, value)?,
        "alpha_p1" => h.alpha_p1 = parse_num(key, value)?,
        "alpha_p2" => h.alpha_p2 = parse_num(key, value)?,
        "sigma" => {
            let s = parse_num(key, value)?;
            (h.sigma_s1, h.sigma_p1, h.sigma_s2, h.sigma_p2) = (s, s, s, s);
        }
        "sigma_s1" => h.sigma_s1 = parse_num(key, value)?,
        "sigma_p1" => h.sigma_p1 = parse_num(key, value)?,
        "sigma_s2" => h.sigma_s2 = parse_num(key, value)?,
        "sigma_p2" => h.sigma_p2 = parse_num(key, value)?,
        "iota" => {
            let p = parse_pair(key, value)?;
            (h.iota_1, h.iota_2) = (p, p);
        }
        "iota_1" => h.iota_1 = parse_pair(key, value)?,
        "iota_2" => h.iota_2 = parse_pair(key, value)?,
        _ => bail!("unknown hyperparameter `{key}`"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# run\nk = 7\nvocab-size=64 # small\nselection = test-f\niota_1 = 4, 1\n\n")
            .unwrap();
        assert_eq!(c.k, 7);
        assert_eq!(c.vocab_size, 64);
        assert_eq!(c.selection, Selection::TestF);
        let m = c.model_config().unwrap();
        assert_eq!(m.hyper.iota_1, [4.0, 1.0]);
        assert_eq!(m.hyper.alpha_s, 0.8);
    }

    #[test]
    fn later_hyper_assignments_win() {
        let mut c = RunConfig::default();
        c.set("alpha", "0.3").unwrap();
        c.set("alpha_s", "0.5").unwrap();
        let h = c.hyper_params(HyperParams::default()).unwrap();
        assert_eq!((h.alpha_s, h.alpha_p1, h.alpha_p2), (0.5, 0.3, 0.3));
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut c = RunConfig::default();
        let e = c.apply_text("k = 3\nwat = 1\n").unwrap_err();
        assert!(format!("{e:#}").contains("line 2"));
        assert!(c.apply_text("k 3").is_err());
        assert!(c.set("k", "-1").is_err());
        assert!(c.set("iota_2", "1").is_err());
        assert!(c.set("alpha", "0").is_ok());
        assert!(c.model_config().is_err());
    }

    #[test]
    fn synth_uses_generating_defaults() {
        let mut c = RunConfig::default();
        c.set("k", "5").unwrap();
        c.set("t", "2").unwrap();
        c.set("s", "2").unwrap();
        let spec = c.synthetic_spec().unwrap();
        assert_eq!(spec, SyntheticSpec::default());
    }
}
