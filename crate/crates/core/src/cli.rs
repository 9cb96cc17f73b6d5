//! The `towe` command line: import, stats, train, eval and grid.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::corpus::{
    compute_statistics, join_parses, read_dataset, read_inline_file, read_parse_file, write_dataset, CorpusStats,
    DatasetSplit,
};
use crate::error::{Error, Result};
use crate::eval::{render_grid_table, run_grid, score_labels, EvalReport, GridReport};
use crate::featurize::{ContextualVectors, InputMode};
use crate::model::{train, EpochLog, TowModel};

#[derive(Debug, Parser)]
#[command(name = "towe", version, about = "Target-oriented opinion word extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert inline-annotated files plus parses into dataset files.
    Import(ImportArgs),
    /// Print corpus statistics per split.
    Stats(StatsArgs),
    /// Train a model and write a checkpoint and dev curve.
    Train(TrainArgs),
    /// Score a checkpoint on a split.
    Eval(EvalArgs),
    /// Run the experiment grid and render the comparison tables.
    Grid(GridArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Experiment config; imports every dataset with `raw` sources.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict a config import to this dataset.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Inline-annotated input file (instead of a config).
    #[arg(long, requires_all = ["parses", "out"], conflicts_with = "config")]
    pub input: Option<PathBuf>,
    /// Parse file (CoNLL or JSONL) for `--input`.
    #[arg(long)]
    pub parses: Option<PathBuf>,
    /// Output dataset file for `--input`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Split name recorded for `--input`.
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only these datasets (repeatable).
    #[arg(long)]
    pub dataset: Vec<String>,
    /// Only these splits, e.g. `train` or `Res14/test` (repeatable).
    #[arg(long)]
    pub split: Vec<String>,
    /// Dataset files to summarise directly.
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset to train on; defaults to the first in the config.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root; overrides `out_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    pub dataset: Option<String>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Dataset file to score (instead of a config dataset).
    #[arg(long, conflicts_with = "config")]
    pub data: Option<PathBuf>,
    /// Contextual sidecar for `--data`.
    #[arg(long)]
    pub contextual: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// First of the run seeds; the grid keeps its number of seeds and uses
    /// consecutive values from here.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

/// Exit status for an error: 2 for usage and configuration problems, 1 for
/// failures while running.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Import(a) => cmd_import(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Grid(a) => cmd_grid(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ImportSummary {
    split: String,
    path: PathBuf,
    instances: usize,
    sentences: usize,
}

fn import_one(input: &Path, parses: &Path, out: &Path, split: &str) -> Result<ImportSummary> {
    let records = read_parse_file(parses)?;
    let raw = read_inline_file(input, split)?;
    let joined = join_parses(raw, &records)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_dataset(out, &joined)?;
    Ok(ImportSummary {
        split: split.to_owned(),
        path: out.to_owned(),
        instances: joined.len(),
        sentences: joined.sentence_ids().len(),
    })
}

pub fn cmd_import(args: ImportArgs) -> Result<()> {
    let mut done = Vec::new();
    if let Some(input) = &args.input {
        let parses = args.parses.as_ref().expect("required by clap");
        let out = args.out.as_ref().expect("required by clap");
        done.push(import_one(input, parses, out, &args.split)?);
    } else {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("import needs --config or --input".into()))?;
        let config = ExperimentConfig::load(path)?;
        let mut any = false;
        for d in &config.datasets {
            if args.dataset.as_ref().is_some_and(|n| n != &d.name) {
                continue;
            }
            let Some(raw) = &d.raw else { continue };
            any = true;
            for (split, input, parses, out) in [
                ("train", &raw.train, &raw.train_parses, &d.train),
                ("test", &raw.test, &raw.test_parses, &d.test),
            ] {
                done.push(import_one(
                    &config.resolve(input),
                    &config.resolve(parses),
                    &config.resolve(out),
                    &format!("{}/{split}", d.name),
                )?);
            }
        }
        if !any {
            return Err(Error::Config("no dataset with raw sources to import".into()));
        }
    }
    match args.format {
        Format::Json => print_json(&done),
        Format::Text => {
            for s in &done {
                println!(
                    "{}: {} instances, {} sentences -> {}",
                    s.split,
                    s.instances,
                    s.sentences,
                    s.path.display()
                );
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct StatsRow {
    split: String,
    #[serde(flatten)]
    stats: CorpusStats,
}

pub fn render_stats_table(rows: &[(String, CorpusStats)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>8}  {:>8}\n",
        "Dataset", "#Sent", "#ASL", "#AT", "#OT", "#D.Dist", "#S.Dist"
    );
    for (name, s) in rows {
        writeln!(
            out,
            "{:<width$}  {:>6}  {:>6.2}  {:>6}  {:>6}  {:>8.2}  {:>8.2}",
            name,
            s.num_sentences,
            s.avg_sentence_length,
            s.num_aspect_terms,
            s.num_opinion_terms,
            s.avg_dependency_distance,
            s.avg_sequential_distance
        )
        .unwrap();
    }
    out
}

type SplitLoader = Box<dyn Fn() -> Result<DatasetSplit>>;

pub fn cmd_stats(args: StatsArgs) -> Result<()> {
    // (display name, loader) pairs, filtered before anything is read.
    let mut available: Vec<(String, SplitLoader)> = Vec::new();
    for file in &args.files {
        let name = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.display().to_string());
        let file = file.clone();
        let n = name.clone();
        available.push((name, Box::new(move || read_dataset(&file, &n))));
    }
    if let Some(path) = &args.config {
        let config = ExperimentConfig::load(path)?;
        for d in &config.datasets {
            if !args.dataset.is_empty() && !args.dataset.contains(&d.name) {
                continue;
            }
            for split in ["train", "test"] {
                let (c, d) = (config.clone(), d.clone());
                available.push((
                    format!("{}/{split}", d.name),
                    Box::new(move || c.load_split(&d, split)),
                ));
            }
        }
    }
    if available.is_empty() {
        return Err(Error::Config("stats needs dataset files or --config".into()));
    }
    let selected: Vec<&(String, SplitLoader)> = available
        .iter()
        .filter(|(name, _)| {
            args.split.is_empty()
                || args
                    .split
                    .iter()
                    .any(|s| name == s || name.rsplit('/').next() == Some(s.as_str()))
        })
        .collect();
    if selected.is_empty() {
        let names: Vec<&str> = available.iter().map(|(n, _)| n.as_str()).collect();
        return Err(Error::Config(format!(
            "no split matches {}; available: {}",
            args.split.join(", "),
            names.join(", ")
        )));
    }
    let mut rows = Vec::new();
    for (name, load) in selected {
        rows.push((name.clone(), compute_statistics(&load()?)?));
    }
    match args.format {
        Format::Json => print_json(
            &rows
                .into_iter()
                .map(|(split, stats)| StatsRow { split, stats })
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            print!("{}", render_stats_table(&rows));
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    dataset: String,
    seed: u64,
    model: String,
    run_dir: PathBuf,
    best_epoch: usize,
    best_dev: EvalReport,
    test: EvalReport,
    num_train: usize,
    num_dev: usize,
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    let name = match &args.dataset {
        Some(n) => n.clone(),
        None => config
            .datasets
            .first()
            .map(|d| d.name.clone())
            .ok_or_else(|| Error::Config("config lists no datasets".into()))?,
    };
    config.validate_for_train(&[&name])?;

    let paths = config.dataset(&name)?.clone();
    let train_split = config.load_split(&paths, "train")?;
    let test_split = config.load_split(&paths, "test")?;
    let mut model_config = config.model.clone();
    let (train_ctx, test_ctx) = if model_config.input.mode == InputMode::Contextual {
        let a = config.load_contextual(&paths, "train")?;
        let b = config.load_contextual(&paths, "test")?;
        if let Some(a) = &a {
            model_config.input.contextual_dim = a.dim;
        }
        (a, b)
    } else {
        (None, None)
    };
    let word_vectors = match model_config.input.mode {
        InputMode::Glove => config.word_vectors_for(&[&train_split, &test_split], &model_config.input)?,
        InputMode::Contextual => crate::model::WordVectors::Random,
    };
    let train_config = config.train_config(model_config.input.mode, config.seed);
    let display = model_config.display_name();

    let run_dir = config.run_dir("train", config.seed)?;
    create_dir(&run_dir)?;
    write_file(&run_dir.join("config.toml"), &config.to_toml()?)?;

    let model = TowModel::initialize(model_config, &[&train_split, &test_split], &word_vectors, config.seed)?;
    let outcome = train(model, &train_split, &train_config, train_ctx.as_ref())?;
    outcome.model.save(&run_dir.join("checkpoint.json"))?;
    let curve: String = outcome
        .history
        .iter()
        .map(|e: &EpochLog| serde_json::to_string(e).map(|s| s + "\n"))
        .collect::<std::result::Result<_, _>>()?;
    write_file(&run_dir.join("dev_curve.jsonl"), &curve)?;

    let preds = outcome.model.predict_all(&test_split.instances, test_ctx.as_ref())?;
    let test = score_labels(&preds, &test_split.instances)?;
    let summary = TrainSummary {
        dataset: name,
        seed: config.seed,
        model: display,
        run_dir: run_dir.clone(),
        best_epoch: outcome.best_epoch,
        best_dev: outcome.best_dev,
        test,
        num_train: outcome.num_train,
        num_dev: outcome.num_dev,
    };
    write_file(&run_dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    log::info!("best dev F1 {} at epoch {}", pct(summary.best_dev.f1), summary.best_epoch);
    match args.format {
        Format::Json => print_json(&summary),
        Format::Text => {
            println!("{} on {} (seed {})", summary.model, summary.dataset, summary.seed);
            println!(
                "best dev F1 {} at epoch {} ({} train / {} dev instances)",
                pct(summary.best_dev.f1),
                summary.best_epoch,
                summary.num_train,
                summary.num_dev
            );
            println!(
                "test P {} R {} F1 {}",
                pct(summary.test.precision),
                pct(summary.test.recall),
                pct(summary.test.f1)
            );
            println!("wrote {}", run_dir.display());
            Ok(())
        }
    }
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = TowModel::load(&args.checkpoint)?;
    let (split, contextual) = if let Some(data) = &args.data {
        let split = read_dataset(data, &args.split)?;
        let ctx = args
            .contextual
            .as_ref()
            .map(|p| ContextualVectors::read(p))
            .transpose()?;
        (split, ctx)
    } else {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("eval needs --data or --config".into()))?;
        let config = ExperimentConfig::load(path)?;
        let name = match &args.dataset {
            Some(n) => n.clone(),
            None => config
                .datasets
                .first()
                .map(|d| d.name.clone())
                .ok_or_else(|| Error::Config("config lists no datasets".into()))?,
        };
        let paths = config.dataset(&name)?;
        let split = config.load_split(paths, &args.split)?;
        let ctx = if model.config.input.mode == InputMode::Contextual {
            config.load_contextual(paths, &args.split)?
        } else {
            None
        };
        (split, ctx)
    };
    if model.config.input.mode == InputMode::Contextual && contextual.is_none() {
        return Err(Error::Config("contextual model needs a sidecar for the split".into()));
    }
    let preds = model.predict_all(&split.instances, contextual.as_ref())?;
    let report = score_labels(&preds, &split.instances)?;
    match args.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!(
                "{} on {}: P {} R {} F1 {} ({} correct / {} predicted / {} gold)",
                model.config.display_name(),
                split.name,
                pct(report.precision),
                pct(report.recall),
                pct(report.f1),
                report.num_correct,
                report.num_pred_spans,
                report.num_gold_spans
            );
            Ok(())
        }
    }
}

pub fn cmd_grid(args: GridArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        let n = config.grid.seeds.len() as u64;
        config.grid.seeds = (seed..seed + n).collect();
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if args.jobs.is_some() {
        config.grid.jobs = args.jobs;
    }
    config.validate_for_grid()?;
    let run_dir = config.run_dir("grid", config.seed)?;
    create_dir(&run_dir)?;
    write_file(&run_dir.join("config.toml"), &config.to_toml()?)?;

    let (base, datasets) = config.grid_inputs()?;
    let report: GridReport = run_grid(&config.grid, &base, &datasets)?;
    let table = render_grid_table(&report);
    write_file(&run_dir.join("grid.json"), &serde_json::to_string_pretty(&report)?)?;
    write_file(&run_dir.join("grid.md"), &table)?;
    match args.format {
        Format::Json => print_json(&report)?,
        Format::Text => {
            print!("{table}");
            println!("wrote {}", run_dir.display());
        }
    }
    let total: usize = report.rows.iter().map(|r| r.cells.len()).sum::<usize>() * report.seeds.len();
    if total > 0 && report.num_failures() == total {
        return Err(Error::Inference("every grid run failed".into()));
    }
    Ok(())
}
