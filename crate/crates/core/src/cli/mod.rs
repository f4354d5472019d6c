//! `lingsel` command line: train, score, select, evaluate, synth.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 numeric.

mod manifest;

use std::collections::{HashMap, HashSet};
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use manifest::{run_manifest_path, RunManifest};

use crate::corpus::{load_binary_embeddings, load_manifest, write_manifest, Corpus};
use crate::dsvdd::{dsvdd_fit, DsvddConfig};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_classifier, gen_synthetic_suite, EvaluationReport};
use crate::iforest::{iforest_train, IForestConfig};
use crate::model::{Classifier, SavedModel, DEFAULT_DSVDD_QUANTILE};
use crate::ocsvm::{ocsvm_train, Gamma, OcSvmConfig};
use crate::selection::{select_ensemble, select_random, select_single, ScoredList, SelectionConfig, SelectionResult, Strategy};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "LINGSEL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lingsel", version, about = "One-class scoring and multi-list utterance selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a one-class classifier on target-language embeddings.
    Train(TrainArgs),
    /// Score a pool manifest with a trained model.
    Score(ScoreArgs),
    /// Select a duration-budgeted subset of the pool.
    Select(SelectArgs),
    /// Positive/negative error rates of a model.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic target/other pair of manifests.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ocsvm,
    Iforest,
    Dsvdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Ensemble,
    Single,
    Random,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Target-language manifest (JSONL).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional LEMB blob holding the embeddings for `--manifest`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub nu: f64,
    /// RBF width; defaults to 1 / (d · pooled variance).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long, default_value_t = 256)]
    pub subsample: usize,
    #[arg(long, default_value_t = 2500)]
    pub ae_epochs: usize,
    #[arg(long, default_value_t = 1000)]
    pub enc_epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub ae_lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub enc_lr: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// L2-normalize embeddings before training (and scoring).
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Score files; for `ensemble` their order defines U1, U2, U3
    /// (conventionally dsvdd,ocsvm,iforest).
    #[arg(long, value_delimiter = ',')]
    pub scores: Vec<PathBuf>,
    /// Pool manifest providing ids and durations.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub hours: f64,
    #[arg(long, default_value_t = 1000)]
    pub l0: usize,
    #[arg(long)]
    pub tight_budget: bool,
    /// File of ids (one per line) removed from the pool and every list.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub pos: PathBuf,
    #[arg(long)]
    pub neg: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DSVDD_QUANTILE)]
    pub dsvdd_quantile: f64,
    /// JSON report path; the text table goes to stdout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub n_target: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_other: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long)]
    pub out_target: PathBuf,
    #[arg(long)]
    pub out_other: PathBuf,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| {
        let started = Instant::now();
        let flags = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
        execute(&cli.command, flags, started)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind().exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // the global pool can only be set once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: &Command, flags: Vec<String>, started: Instant) -> Result<()> {
    let (name, mut rm) = match command {
        Command::Train(a) => ("train", cmd_train(a)?),
        Command::Score(a) => ("score", cmd_score(a)?),
        Command::Select(a) => ("select", cmd_select(a)?),
        Command::Evaluate(a) => ("evaluate", cmd_evaluate(a)?),
        Command::Synth(a) => ("synth", cmd_synth(a)?),
    };
    rm.command = name.to_string();
    rm.flags = flags;
    rm.wall_clock_sec = started.elapsed().as_secs_f64();
    rm.write()
}

fn load_corpus(manifest: &Path, embeddings: Option<&Path>) -> Result<Corpus> {
    match embeddings {
        Some(blob) => load_binary_embeddings(manifest, blob),
        None => load_manifest(manifest),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, &row).expect("record serialization cannot fail");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_train(a: &TrainArgs) -> Result<RunManifest> {
    let mut rm = RunManifest::default();
    rm.input(&a.manifest)?;
    if let Some(blob) = &a.embeddings {
        rm.input(blob)?;
    }
    let mut corpus = load_corpus(&a.manifest, a.embeddings.as_deref())?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no training records", a.manifest.display())));
    }
    if a.normalize {
        corpus = corpus.normalized();
    }
    let data = corpus.matrix();
    let classifier = match a.method {
        Method::Ocsvm => {
            let cfg = OcSvmConfig {
                nu: a.nu,
                gamma: a.gamma.map_or(Gamma::Scale, Gamma::Fixed),
                tol: a.tol,
                max_iter: a.max_iter,
            };
            let fit = ocsvm_train(data.view(), &cfg)?;
            if !fit.model.converged {
                eprintln!("warning: solver stopped after {} iterations without meeting the tolerance", fit.iterations);
            }
            Classifier::OcSvm(fit.model)
        }
        Method::Iforest => {
            let cfg = IForestConfig {
                n_trees: a.trees,
                subsample: a.subsample,
                seed: a.seed,
            };
            rm.seeds.insert("iforest".into(), a.seed);
            Classifier::IForest(iforest_train(data.view(), &cfg)?)
        }
        Method::Dsvdd => {
            let cfg = DsvddConfig {
                ae_epochs: a.ae_epochs,
                ae_lr: a.ae_lr,
                enc_epochs: a.enc_epochs,
                enc_lr: a.enc_lr,
                weight_decay: a.weight_decay,
                batch_size: a.batch_size,
                latent_dim: a.latent_dim,
                seed: a.seed,
            };
            cfg.validate()?;
            rm.seeds.insert("dsvdd".into(), a.seed);
            Classifier::Dsvdd(dsvdd_fit(data.view(), &cfg)?.model)
        }
    };
    SavedModel::new(classifier, a.normalize).save(&a.out)?;
    rm.output(&a.out)?;
    Ok(rm)
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    id: String,
    score: f64,
}

pub fn cmd_score(a: &ScoreArgs) -> Result<RunManifest> {
    let mut rm = RunManifest::default();
    rm.input(&a.model)?;
    rm.input(&a.manifest)?;
    if let Some(blob) = &a.embeddings {
        rm.input(blob)?;
    }
    let model = SavedModel::load(&a.model)?;
    let pool = load_corpus(&a.manifest, a.embeddings.as_deref())?;
    let scores = model.score(&pool)?;
    write_jsonl(
        &a.out,
        pool.records().iter().zip(&scores).map(|(r, &score)| ScoreRow { id: r.id.clone(), score }),
    )?;
    println!("scored {} utterances with {}", scores.len(), model.classifier.kind());
    rm.output(&a.out)?;
    Ok(rm)
}

/// Read a `{"id","score"}` JSONL file; duplicate ids are rejected.
pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ScoreRow = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            msg: format!("{}: {e}", path.display()),
        })?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::DuplicateId { line: i + 1, id: row.id });
        }
        out.push((row.id, row.score));
    }
    Ok(out)
}

fn read_id_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

#[derive(Serialize)]
struct SelectionRow<'a> {
    rank: usize,
    id: &'a str,
    duration_sec: f64,
    cumulative_sec: f64,
}

#[derive(Serialize)]
struct SelectionSummary {
    strategy: Strategy,
    k_hours: f64,
    l0: usize,
    tight_budget: bool,
    seed: u64,
    selected: usize,
    total_sec: f64,
    exhausted: bool,
    passes: usize,
}

#[derive(Serialize)]
struct SummaryRecord {
    summary: SelectionSummary,
}

pub fn cmd_select(a: &SelectArgs) -> Result<RunManifest> {
    let (strategy, want) = match a.strategy {
        StrategyArg::Ensemble => (Strategy::Ensemble, 3),
        StrategyArg::Single => (Strategy::Single, 1),
        StrategyArg::Random => (Strategy::Random, 0),
    };
    if a.scores.len() != want {
        return Err(Error::InvalidConfig(format!(
            "strategy {strategy:?} takes {want} score file(s), got {}",
            a.scores.len()
        )));
    }
    let config = SelectionConfig {
        l0: a.l0,
        seed: a.seed,
        tight_budget: a.tight_budget,
        ..SelectionConfig::from_hours(a.hours, strategy)
    };
    config.validate()?;

    let mut rm = RunManifest::default();
    rm.input(&a.pool)?;
    let exclude = match &a.exclude {
        Some(p) => {
            rm.input(p)?;
            read_id_list(p)?
        }
        None => HashSet::new(),
    };
    let pool = load_manifest(&a.pool)?.without(&exclude);
    let durations: HashMap<String, f64> = pool.records().iter().map(|r| (r.id.clone(), r.duration_sec)).collect();
    let mut lists = Vec::new();
    for path in &a.scores {
        rm.input(path)?;
        let scores = read_scores(path)?;
        for (id, _) in &scores {
            if !durations.contains_key(id) && !exclude.contains(id) {
                return Err(Error::UnknownId(format!("{id} in {} is not in the pool", path.display())));
            }
        }
        lists.push(ScoredList::from_scores(scores)?.without(&exclude));
    }
    let result: SelectionResult = match strategy {
        Strategy::Ensemble => select_ensemble(&lists[0], &lists[1], &lists[2], &durations, &config)?,
        Strategy::Single => select_single(&lists[0], &durations, &config)?,
        Strategy::Random => {
            rm.seeds.insert("random".into(), a.seed);
            let ids: Vec<String> = pool.ids().map(String::from).collect();
            select_random(&ids, &durations, &config)?
        }
    };

    let mut cumulative = 0.0;
    let rows: Vec<serde_json::Value> = result
        .selected
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let d = durations[id];
            cumulative += d;
            serde_json::to_value(SelectionRow {
                rank: i + 1,
                id,
                duration_sec: d,
                cumulative_sec: cumulative,
            })
            .expect("row serialization cannot fail")
        })
        .collect();
    let summary = SummaryRecord {
        summary: SelectionSummary {
            strategy,
            k_hours: a.hours,
            l0: a.l0,
            tight_budget: a.tight_budget,
            seed: a.seed,
            selected: result.selected.len(),
            total_sec: result.total_sec,
            exhausted: result.exhausted,
            passes: result.passes,
        },
    };
    let summary = serde_json::to_value(summary).expect("summary serialization cannot fail");
    write_jsonl(&a.out, rows.into_iter().chain(std::iter::once(summary)))?;
    if result.exhausted {
        eprintln!(
            "warning: candidates exhausted at {:.1} s of the {:.1} s budget",
            result.total_sec, config.budget_sec
        );
    }
    println!("selected {} utterances, {:.1} s", result.selected.len(), result.total_sec);
    rm.output(&a.out)?;
    Ok(rm)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<RunManifest> {
    let mut rm = RunManifest::default();
    for p in [&a.model, &a.pos, &a.neg] {
        rm.input(p)?;
    }
    let model = SavedModel::load(&a.model)?;
    let pos = load_manifest(&a.pos)?;
    let neg = load_manifest(&a.neg)?;
    let threshold = model.classifier.default_threshold(a.dsvdd_quantile)?;
    let rates = evaluate_classifier(&model.score(&pos)?, &model.score(&neg)?, threshold)?;
    let report = EvaluationReport {
        model_type: model.classifier.kind().to_string(),
        threshold,
        rates,
    };
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report).expect("report serialization cannot fail");
    w.write_all(b"\n").and_then(|()| w.flush()).map_err(|e| Error::io(&a.out, e))?;
    print!("{}", report.table());
    rm.output(&a.out)?;
    Ok(rm)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<RunManifest> {
    let (target, other) = gen_synthetic_suite(a.seed, a.n_target, a.n_other, a.dim, a.separation)?;
    write_manifest(&target, &a.out_target)?;
    write_manifest(&other, &a.out_other)?;
    let mut rm = RunManifest::default();
    rm.seeds.insert("synth".into(), a.seed);
    rm.output(&a.out_target)?;
    rm.output(&a.out_other)?;
    Ok(rm)
}
