use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ibtm::predict::Selection;
use ibtm_cli::commands::{cmd_evaluate, cmd_generate, cmd_predict, cmd_serve, cmd_synth, cmd_train};
use ibtm_cli::service::ServeOptions;
use ibtm_cli::{CliError, PredictorKind, RunConfig};

#[derive(Parser)]
#[command(name = "ibtm", version, about = "Diagnostic label prediction from discomfort drawings")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command. Each flag overrides the same key of the
/// `--config` file.
#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Exchangeable-label TSV (alias TAB canonical).
    #[arg(long, global = true)]
    maps: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shared topics.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Drawing-private topics.
    #[arg(long, global = true)]
    t: Option<usize>,
    /// Label-private topics.
    #[arg(long, global = true)]
    s: Option<usize>,
    /// Mean-shift radius for region counting.
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    /// Label token multiplicity.
    #[arg(long, global = true)]
    scale: Option<u32>,
    #[arg(long, global = true)]
    label: Option<String>,
    #[arg(long, global = true, env = "IBTM_PORT")]
    port: Option<u16>,
    /// Location vocabulary size.
    #[arg(long, global = true)]
    vocab_size: Option<usize>,
    #[arg(long, global = true)]
    max_sweeps: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) if !p.exists() => {
                return Err(CliError::MissingPath {
                    what: "config",
                    path: p.clone(),
                })
            }
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        let overrides = [
            ("corpus", path(&self.corpus)),
            ("maps", path(&self.maps)),
            ("model", path(&self.model)),
            ("out", path(&self.out)),
            ("seed", self.seed.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("t", self.t.map(|v| v.to_string())),
            ("s", self.s.map(|v| v.to_string())),
            ("bandwidth", self.bandwidth.map(|v| v.to_string())),
            ("scale", self.scale.map(|v| v.to_string())),
            ("label", self.label.clone()),
            ("port", self.port.map(|v| v.to_string())),
            ("vocab_size", self.vocab_size.map(|v| v.to_string())),
            ("max_sweeps", self.max_sweeps.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a labeled corpus and write the model file.
    Train,
    /// Rank labels for each drawing of a corpus file.
    Predict {
        /// One JSON response per drawing, as returned by the service.
        #[arg(long)]
        json: bool,
    },
    /// Repeated 50/50 splits with seed selection; prints mean F and its spread.
    Evaluate {
        #[arg(long, default_value = "ibtm")]
        predictor: PredictorKind,
        #[arg(long)]
        selection: Option<Selection>,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Labels drawn per document by the random predictor.
        #[arg(long, default_value_t = 5)]
        budget: usize,
    },
    /// Render the typical drawing of a label as an SVG heat map.
    Generate {
        /// Contour TSV (`view<TAB>svg path` rows) to draw under the heat map.
        #[arg(long)]
        contour: Option<PathBuf>,
        /// Number of locations to plot.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Sample a corpus from peaked synthetic topics.
    Synth {
        /// Number of documents.
        #[arg(long)]
        docs: Option<usize>,
    },
    /// Serve the prediction API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory served under `/` (the drawing UI).
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Append one JSON line per request to this file.
        #[arg(long)]
        audit_log: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = cli.common.resolve()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train => cmd_train(&cfg, &mut out),
        Command::Predict { json } => cmd_predict(&cfg, json, &mut out),
        Command::Evaluate {
            predictor,
            selection,
            splits,
            seeds,
            budget,
        } => {
            if let Some(s) = selection {
                cfg.selection = s;
            }
            cfg.splits = splits.unwrap_or(cfg.splits);
            cfg.seeds = seeds.unwrap_or(cfg.seeds);
            cmd_evaluate(&cfg, predictor, budget, &mut out)
        }
        Command::Generate { contour, top } => {
            cfg.top = top.unwrap_or(cfg.top);
            cmd_generate(&cfg, contour.as_deref(), &mut out)
        }
        Command::Synth { docs } => {
            cfg.docs = docs.unwrap_or(cfg.docs);
            cmd_synth(&cfg, &mut out)
        }
        Command::Serve {
            host,
            static_dir,
            audit_log,
        } => {
            drop(out);
            cmd_serve(&cfg, &host, ServeOptions { static_dir }, audit_log.as_deref())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::INFO)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed(e))
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
