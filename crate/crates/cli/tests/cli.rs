use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn ibtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibtm"))
        .args(args)
        .env_remove("IBTM_PORT")
        .output()
        .expect("run ibtm")
}

fn ok(args: &[&str]) -> String {
    let out = ibtm(args);
    assert!(
        out.status.success(),
        "ibtm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    corpus: PathBuf,
    model: PathBuf,
    train_stdout: String,
}

const SMALL: &[&str] = &["--k", "3", "--t", "1", "--s", "1", "--vocab-size", "24", "--max-sweeps", "40"];

/// A small synthetic corpus and a model trained on it, shared by the tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("synth.conf");
        std::fs::write(&cfg, "k = 3\nt = 1\ns = 1\nv = 24\nl = 8\ndocs = 40\nwords_per_doc = 30\n").unwrap();
        let corpus = dir.path().join("corpus.jsonl");
        ok(&["synth", "--config", s(&cfg), "--out", s(&corpus)]);
        let model = dir.path().join("model.bin");
        let mut args = vec!["train", "--corpus", s(&corpus), "--out", s(&model)];
        args.extend_from_slice(SMALL);
        let train_stdout = ok(&args);
        Fixture {
            dir,
            corpus,
            model,
            train_stdout,
        }
    })
}

#[test]
fn train_writes_model_and_nondecreasing_trace() {
    let f = fixture();
    assert!(f.model.exists());
    let elbos: Vec<f64> = f
        .train_stdout
        .lines()
        .filter_map(|l| l.strip_prefix("sweep "))
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(elbos.len() >= 2);
    for w in elbos.windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
    assert!(f.train_stdout.contains("training_id"));
}

#[test]
fn missing_corpus_exits_2_and_names_path() {
    let out = ibtm(&["train", "--corpus", "/nonexistent/corpus.jsonl", "--out", "/tmp/x.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/corpus.jsonl"));
    let out = ibtm(&["predict", "--model", "/nonexistent/m.bin", "--corpus", "/nonexistent/c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/m.bin"));
}

#[test]
fn same_seed_gives_identical_model_files() {
    let f = fixture();
    let again = f.dir.path().join("again.bin");
    let mut args = vec!["train", "--corpus", s(&f.corpus), "--out", s(&again)];
    args.extend_from_slice(SMALL);
    let stdout = ok(&args);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&f.model).unwrap());
    let trace = |t: &str| t.lines().filter(|l| l.starts_with("sweep ")).map(String::from).collect::<Vec<_>>();
    assert_eq!(trace(&stdout), trace(&f.train_stdout));
}

#[test]
fn one_point_drawing_gets_five_labels() {
    let f = fixture();
    let drawing = f.dir.path().join("one.jsonl");
    std::fs::write(
        &drawing,
        r#"{"id":"q","points":[{"view":"back","x":0.5,"y":0.6,"intensity":1.0}],"labels":[]}"#,
    )
    .unwrap();
    let out = ok(&["predict", "--model", s(&f.model), "--corpus", s(&drawing)]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# q budget=5 regions=1");
    assert_eq!(lines.len(), 6);
    let scores: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn oracle_evaluation_is_perfect() {
    let f = fixture();
    let report = f.dir.path().join("report.tsv");
    let out = ok(&[
        "evaluate",
        "--predictor",
        "oracle",
        "--corpus",
        s(&f.corpus),
        "--splits",
        "3",
        "--seeds",
        "2",
        "--out",
        s(&report),
    ]);
    assert_eq!(out.lines().last(), Some("F = 1.0000 ± 0.0000"));
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out);
    assert!(out.starts_with("# "));
}

#[test]
fn ibtm_evaluation_runs() {
    let f = fixture();
    let mut args = vec!["evaluate", "--corpus", s(&f.corpus), "--splits", "2", "--seeds", "1", "--selection", "test-f"];
    args.extend_from_slice(SMALL);
    let out = ok(&args);
    assert!(out.contains("selection=test-f"));
    assert!(out.lines().last().unwrap().starts_with("F = "));
}

#[test]
fn synth_writes_requested_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    std::fs::write(&cfg, "k = 5\nt = 2\ns = 2\ndocs = 500\n").unwrap();
    let out_path = dir.path().join("syn.jsonl");
    let out = ok(&["synth", "--config", s(&cfg), "--out", s(&out_path)]);
    assert!(out.contains("wrote 500 documents"));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let records = text.lines().filter(|l| l.starts_with("{\"id\"")).count();
    assert_eq!(records, 500);
}

#[test]
fn generate_svg_and_unknown_label() {
    let f = fixture();
    let ranked = ok(&["predict", "--model", s(&f.model), "--corpus", s(&f.corpus)]);
    let label = ranked.lines().nth(1).unwrap().split('\t').nth(2).unwrap().to_string();
    let svg = f.dir.path().join("label.svg");
    let out = ok(&["generate", "--model", s(&f.model), "--label", &label, "--out", s(&svg), "--top", "4"]);
    assert_eq!(out.lines().count(), 5);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<circle").count(), 4);
    let bad = ibtm(&["generate", "--model", s(&f.model), "--label", "no such label"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no such label"));
}

#[test]
fn corrupt_model_is_rejected() {
    let f = fixture();
    let mut bytes = std::fs::read(&f.model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let bad = f.dir.path().join("corrupt.bin");
    std::fs::write(&bad, bytes).unwrap();
    let out = ibtm(&["predict", "--model", s(&bad), "--corpus", s(&f.corpus)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn flags_override_config_file() {
    let f = fixture();
    let cfg = f.dir.path().join("train.conf");
    std::fs::write(&cfg, "k = 9\nt = 1\ns = 1\nvocab_size = 24\nmax_sweeps = 3\n").unwrap();
    let model = f.dir.path().join("override.bin");
    let out = ok(&["train", "--config", s(&cfg), "--k", "2", "--corpus", s(&f.corpus), "--out", s(&model)]);
    assert!(out.contains("K=2 "), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("sweep ")).count(), 3);
    let missing = ibtm(&["train", "--config", "/nonexistent/run.conf"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/run.conf"));
}
