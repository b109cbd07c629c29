//! The subcommands. Each takes a resolved [`RunConfig`] and writes its
//! line-oriented report to `out`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ibtm::corpus::{parse_corpus, serialize_corpus, Corpus};
use ibtm::generate::{generate, render_heatmap, Contour};
use ibtm::pipeline::fit_with;
use ibtm::predict::{evaluate, evaluate_with, EvalReport, OraclePredictor, RandomPredictor};

use crate::api::{predict_response, LoadedModel};
use crate::config::RunConfig;
use crate::service::{self, AppState, ServeOptions};

#[derive(Debug)]
pub enum CliError {
    /// A required setting was not given.
    Usage(String),
    /// An input file does not exist.
    MissingPath { what: &'static str, path: PathBuf },
    Failed(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::MissingPath { what, path } => write!(f, "{what} file not found: {}", path.display()),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingPath { .. } => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<ibtm::Error> for CliError {
    fn from(e: ibtm::Error) -> Self {
        CliError::Failed(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn input<'a>(path: &'a Option<PathBuf>, what: &'static str, flag: &str) -> CliResult<&'a Path> {
    let path = path
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{what} path is required ({flag})")))?;
    if !path.exists() {
        return Err(CliError::MissingPath {
            what,
            path: path.to_path_buf(),
        });
    }
    Ok(path)
}

fn output<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("output path is required ({flag})")))
}

/// Checks that every configured input path exists, naming the first missing
/// one.
fn check_optional_inputs(cfg: &RunConfig) -> CliResult {
    if let Some(maps) = &cfg.maps {
        input(&Some(maps.clone()), "maps", "--maps")?;
    }
    Ok(())
}

pub fn read_corpus(path: &Path) -> anyhow::Result<Corpus> {
    let file = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
    parse_corpus(BufReader::new(file)).with_context(|| format!("reading corpus {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_model(cfg: &RunConfig) -> CliResult<LoadedModel> {
    let path = input(&cfg.model, "model", "--model")?;
    Ok(LoadedModel::load(path)?)
}

/// Preprocess, build vocabularies, train, and write the model file. One
/// `sweep <n> elbo <value>` line per sweep.
pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    let corpus_path = input(&cfg.corpus, "corpus", "--corpus")?;
    check_optional_inputs(cfg)?;
    let model_path = cfg
        .out
        .as_ref()
        .or(cfg.model.as_ref())
        .ok_or_else(|| CliError::Usage("output path is required (--out or --model)".into()))?;
    let settings = cfg.fit_settings()?;
    let corpus = read_corpus(corpus_path)?;
    let mut io_err = None;
    let model = fit_with(&corpus, &settings, |sweep, elbo| {
        if io_err.is_none() {
            io_err = writeln!(out, "sweep {sweep} elbo {elbo:.6}").err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let bytes = model.to_bytes()?;
    write_file(model_path, &bytes)?;
    let loaded = LoadedModel::new(model);
    let c = &loaded.model.config;
    writeln!(
        out,
        "model {} training_id {} K={} T={} S={} V={} L={} sweeps={}",
        model_path.display(),
        loaded.info.training_id,
        c.k,
        c.t,
        c.s,
        c.v,
        c.l,
        loaded.model.sweeps
    )?;
    Ok(())
}

/// Ranks labels for every drawing in the corpus file. Text mode prints a
/// `# <id> budget=<b> regions=<n>` header and `<rank>\t<score>\t<label>` lines;
/// JSON mode prints one service-identical response per line.
pub fn cmd_predict(cfg: &RunConfig, json: bool, out: &mut dyn Write) -> CliResult {
    let model = load_model(cfg)?;
    let corpus_path = input(&cfg.corpus, "corpus", "--corpus")?;
    let bandwidth = cfg.checked_bandwidth()?;
    let corpus = read_corpus(corpus_path)?;
    for doc in &corpus.documents {
        let r = predict_response(&model, &doc.points, bandwidth).with_context(|| format!("document `{}`", doc.id))?;
        if json {
            writeln!(out, "{}", serde_json::to_string(&r).map_err(anyhow::Error::from)?)?;
            continue;
        }
        writeln!(out, "# {} budget={} regions={}", doc.id, r.budget, r.regions)?;
        for (i, l) in r.labels.iter().enumerate() {
            writeln!(out, "{}\t{:.6}\t{}", i + 1, l.score, l.label)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Ibtm,
    Oracle,
    Random,
}

impl std::str::FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ibtm" => Ok(Self::Ibtm),
            "oracle" => Ok(Self::Oracle),
            "random" => Ok(Self::Random),
            _ => Err(format!("unknown predictor `{s}` (expected ibtm, oracle or random)")),
        }
    }
}

/// Runs the split/seed protocol and prints the report table. `random_budget`
/// is the number of labels the random predictor draws.
pub fn cmd_evaluate(cfg: &RunConfig, predictor: PredictorKind, random_budget: usize, out: &mut dyn Write) -> CliResult {
    let corpus_path = input(&cfg.corpus, "corpus", "--corpus")?;
    check_optional_inputs(cfg)?;
    let protocol = cfg.protocol()?;
    let settings = cfg.fit_settings()?;
    let corpus = read_corpus(corpus_path)?;
    let report: EvalReport = match predictor {
        PredictorKind::Ibtm => evaluate(&corpus, &settings, cfg.checked_bandwidth()?, &protocol)?,
        PredictorKind::Oracle => evaluate_with(&corpus.normalized(&settings.maps), &OraclePredictor, &protocol)?,
        PredictorKind::Random => {
            let random = RandomPredictor {
                budget: random_budget,
                seed: cfg.seed,
            };
            evaluate_with(&corpus.normalized(&settings.maps), &random, &protocol)?
        }
    };
    let table = report.to_string();
    if let Some(path) = &cfg.out {
        write_file(path, table.as_bytes())?;
    }
    write!(out, "{table}")?;
    if !table.ends_with('\n') {
        writeln!(out)?;
    }
    Ok(())
}

/// Writes the SVG heat map of a label's typical drawing to `--out` (or `out`
/// when no path is set) and lists the locations.
pub fn cmd_generate(cfg: &RunConfig, contour: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let model = load_model(cfg)?;
    let label = cfg
        .label
        .as_deref()
        .ok_or_else(|| CliError::Usage("label is required (--label)".into()))?;
    let contour = match contour {
        Some(p) => Contour::load(input(&Some(p.to_path_buf()), "contour", "--contour")?)?,
        None => Contour::builtin(),
    };
    let drawing = generate(label, &model.model, cfg.top)?;
    let svg = render_heatmap(&drawing, &contour);
    match &cfg.out {
        Some(path) => {
            write_file(path, svg.as_bytes())?;
            writeln!(out, "# {} -> {}", drawing.label, path.display())?;
            for l in &drawing.locations {
                writeln!(out, "{}\t{:.4}\t{:.4}\t{:.4}", l.view.as_str(), l.x, l.y, l.weight)?;
            }
        }
        None => write!(out, "{svg}")?,
    }
    Ok(())
}

/// Samples a corpus from peaked synthetic topics and writes it to `--out`.
pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> CliResult {
    let path = output(&cfg.out, "--out")?;
    let spec = cfg.synthetic_spec()?;
    let synth = spec.generate()?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serialize_corpus(&synth.corpus, &mut w)?;
    w.flush()?;
    writeln!(out, "wrote {} documents to {}", synth.corpus.len(), path.display())?;
    Ok(())
}

/// Loads the model once and serves it until interrupted.
pub fn cmd_serve(cfg: &RunConfig, host: &str, options: ServeOptions, audit_log: Option<&Path>) -> CliResult {
    let model = load_model(cfg)?;
    if let Some(dir) = &options.static_dir {
        input(&Some(dir.clone()), "static directory", "--static-dir")?;
    }
    let mut state = AppState::new(model, cfg.checked_bandwidth()?);
    if let Some(p) = audit_log {
        state = state
            .with_audit_log(p)
            .with_context(|| format!("opening audit log {}", p.display()))?;
    }
    let addr: SocketAddr = format!("{host}:{}", cfg.port)
        .parse()
        .map_err(|e| anyhow!("bad listen address {host}:{}: {e}", cfg.port))?;
    let app = service::router(state, &options);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(app, addr))?;
    Ok(())
}
