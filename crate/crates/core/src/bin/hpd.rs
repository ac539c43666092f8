//! Command-line interface: data generation, phrase-table induction, model
//! training, prediction, evaluation and component breakdown.
//!
//! Reports are written as JSON files and summarized as plain tables on
//! stdout; progress and timing go to stderr so report output stays
//! byte-deterministic for a fixed seed. Exit codes: 0 success, 1 evaluation
//! completed with failures, 2 hard error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hpd_core::config::AppConfig;
use hpd_core::decode::gold_primitives;
use hpd_core::harness::{
    generate_synthetic, load_dataset, run_breakdown, save_dataset, split_records,
    vocab_from_records, DatasetRecord, PathStage, PipelineSetup, PrimitiveStage, SketchStage,
    Split,
};
use hpd_core::neural::checkpoint::{
    load_path_scorer, load_sketch_model, save_path_scorer, save_sketch_model,
};
use hpd_core::neural::{train_path_scorer, train_poset_decoder, PathScorerExample, SketchModel};
use hpd_core::phrase_table::{tokenize, PhraseTable, PrimitiveSet};
use hpd_core::poset::{Label, Vocabulary};
use hpd_core::query::{parse_query, query_to_poset};
use hpd_core::sketch::{extract_sketch, AbstractionMap};

#[derive(Parser)]
#[command(name = "hpd", about = "Hierarchical poset decoding for conjunctive queries")]
struct Cli {
    /// JSON configuration file; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Turn ingestion issues into hard errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic compositional dataset (JSONL).
    GenData(GenDataArgs),
    /// Induce the phrase table from the train split.
    InducePhrases(InducePhrasesArgs),
    /// Train the sketch decoder on the train split.
    TrainSketch(TrainSketchArgs),
    /// Train the path entailment scorer on the train split.
    TrainPathScorer(TrainPathScorerArgs),
    /// Predict the query for one question.
    Predict(PredictArgs),
    /// Exact-match evaluation of a split.
    Eval(EvalArgs),
    /// Per-component breakdown of a split.
    Breakdown(EvalArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InducePhrasesArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSketchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint stem: writes <stem>.tensors, <stem>.json and a vocab file
    /// next to it.
    #[arg(long)]
    out_stem: PathBuf,
    /// Optional JSON loss-trace report.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPathScorerArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON loss-trace report.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Sketch model checkpoint stem.
    #[arg(long)]
    sketch_model: Option<PathBuf>,
    /// Phrase table TSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Path scorer JSON.
    #[arg(long)]
    scorer: Option<PathBuf>,
    /// Task vocabulary JSON (written by train-sketch).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Replace the sketch stage with the gold oracle.
    #[arg(long)]
    oracle_sketch: bool,
    /// Replace primitive prediction with the gold oracle.
    #[arg(long)]
    oracle_primitives: bool,
    /// Replace path scoring with the gold oracle.
    #[arg(long)]
    oracle_paths: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    question: String,
    #[command(flatten)]
    models: ModelArgs,
    /// Optional JSON trace output.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "dev")]
    split: Split,
    #[command(flatten)]
    models: ModelArgs,
    /// JSON report output.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match AppConfig::load(path) {
            Ok(cfg) => cfg,
            Err(message) => {
                eprintln!("error: {message}");
                return ExitCode::from(2);
            }
        },
        None => AppConfig::default(),
    };
    let config = match cli.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    };

    match run(&cli, config) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli, config: AppConfig) -> Result<ExitCode> {
    match &cli.command {
        Command::GenData(args) => gen_data(args, &config),
        Command::InducePhrases(args) => induce_phrases(args, &config, cli.strict),
        Command::TrainSketch(args) => train_sketch(args, &config, cli.strict),
        Command::TrainPathScorer(args) => train_path_scorer_cmd(args, &config, cli.strict),
        Command::Predict(args) => predict(args, &config),
        Command::Eval(args) => eval(args, &config, cli.strict, false),
        Command::Breakdown(args) => eval(args, &config, cli.strict, true),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn gen_data(args: &GenDataArgs, config: &AppConfig) -> Result<ExitCode> {
    let records = generate_synthetic(&config.generator)?;
    save_dataset(&args.out, &records)?;
    let count = |s: Split| records.iter().filter(|r| r.split == s).count();
    println!("generated {} records -> {}", records.len(), args.out.display());
    println!(
        "  train {}  dev {}  test {}",
        count(Split::Train),
        count(Split::Dev),
        count(Split::Test)
    );
    Ok(ExitCode::SUCCESS)
}

fn load_records(path: &Path, config: &AppConfig, strict: bool) -> Result<Vec<DatasetRecord>> {
    let (records, issues) = load_dataset(path, &config.field_map, strict)?;
    for issue in &issues {
        eprintln!("warning: line {}: {}", issue.line, issue.message);
    }
    if records.is_empty() {
        bail!("no usable records in {}", path.display());
    }
    Ok(records)
}

/// (question, gold primitive set) pairs for the train split.
fn train_corpus(
    records: &[DatasetRecord],
    vocab: &Vocabulary,
    map: &AbstractionMap,
) -> Result<Vec<(String, PrimitiveSet)>> {
    split_records(records, Split::Train)
        .iter()
        .map(|r| {
            let query = parse_query(&r.query).map_err(|e| anyhow!("{e}"))?;
            let poset = query_to_poset(&query, vocab).map_err(|e| anyhow!("{e}"))?;
            Ok((r.question.clone(), gold_primitives(&poset, map)))
        })
        .collect()
}

fn induce_phrases(args: &InducePhrasesArgs, config: &AppConfig, strict: bool) -> Result<ExitCode> {
    let records = load_records(&args.data, config, strict)?;
    let vocab = vocab_from_records(&records)?;
    let map = AbstractionMap::predicate_entity(&vocab).map_err(|e| anyhow!("{e}"))?;
    let corpus = train_corpus(&records, &vocab, &map)?;
    let table = PhraseTable::induce(&corpus, config.induce.into())?;
    std::fs::write(&args.out, table.to_tsv())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "induced phrase table with {} (phrase, primitive) pairs -> {}",
        table.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct VocabFile {
    all_tokens: Vec<String>,
    once_only: Vec<String>,
}

fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let file = VocabFile {
        all_tokens: vocab.all_tokens().iter().map(|l| l.as_str().to_string()).collect(),
        once_only: vocab.once_only().iter().map(|l| l.as_str().to_string()).collect(),
    };
    write_json(path, &file)
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let file: VocabFile = serde_json::from_str(
        &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
    )?;
    let parse = |v: Vec<String>| -> Result<Vec<Label>> {
        v.into_iter().map(|s| Label::new(s).map_err(|e| anyhow!("{e}"))).collect()
    };
    Vocabulary::new(parse(file.all_tokens)?, parse(file.once_only)?).map_err(|e| anyhow!("{e}"))
}

fn vocab_path(stem: &Path) -> PathBuf {
    stem.with_file_name(format!(
        "{}-vocab.json",
        stem.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ))
}

fn train_sketch(args: &TrainSketchArgs, config: &AppConfig, strict: bool) -> Result<ExitCode> {
    let records = load_records(&args.data, config, strict)?;
    let vocab = vocab_from_records(&records)?;
    let map = AbstractionMap::predicate_entity(&vocab).map_err(|e| anyhow!("{e}"))?;

    let mut data = Vec::new();
    for record in split_records(&records, Split::Train) {
        let query = parse_query(&record.query).map_err(|e| anyhow!("{e}"))?;
        let poset = query_to_poset(&query, &vocab).map_err(|e| anyhow!("{e}"))?;
        let sketch = extract_sketch(&poset, &map).map_err(|e| anyhow!("{e}"))?;
        data.push((tokenize(&record.question), sketch.poset().clone()));
    }

    let started = Instant::now();
    let (model, trace) = train_poset_decoder(&data, &config.train)?;
    eprintln!("trained sketch model in {:.1?}", started.elapsed());

    if let Some(parent) = args.out_stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_sketch_model(&args.out_stem, &model)?;
    save_vocab(&vocab_path(&args.out_stem), &vocab)?;
    if let Some(path) = &args.trace_out {
        write_json(path, &trace.epoch_losses)?;
    }
    println!(
        "trained sketch decoder: {} examples, final loss {:.6}",
        data.len(),
        trace.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("checkpoint -> {}", args.out_stem.display());
    Ok(ExitCode::SUCCESS)
}

fn train_path_scorer_cmd(
    args: &TrainPathScorerArgs,
    config: &AppConfig,
    strict: bool,
) -> Result<ExitCode> {
    let records = load_records(&args.data, config, strict)?;
    let vocab = vocab_from_records(&records)?;
    let map = AbstractionMap::predicate_entity(&vocab).map_err(|e| anyhow!("{e}"))?;
    let table = PhraseTable::from_tsv(
        &std::fs::read_to_string(&args.table)
            .with_context(|| format!("reading {}", args.table.display()))?,
    )?;

    let data = build_scorer_dataset(&records, &vocab, &map, &table, config)?;
    let started = Instant::now();
    let (params, trace) = train_path_scorer(&data, &table, &map, &config.scorer_train)?;
    eprintln!("trained path scorer in {:.1?}", started.elapsed());

    save_path_scorer(&args.out, &params)?;
    if let Some(path) = &args.trace_out {
        write_json(path, &trace.epoch_losses)?;
    }
    println!(
        "trained path scorer on {} instances, final loss {:.6}",
        data.len(),
        trace.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("scorer -> {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Positives are the gold maximal paths; negatives are the other candidates
/// enumerated from the gold sketch with phrase-table primitives (ensuring
/// the gold primitives are present so gold paths are always enumerable).
fn build_scorer_dataset(
    records: &[DatasetRecord],
    vocab: &Vocabulary,
    map: &AbstractionMap,
    table: &PhraseTable,
    config: &AppConfig,
) -> Result<Vec<PathScorerExample>> {
    let mut data = Vec::new();
    for record in split_records(records, Split::Train) {
        let query = parse_query(&record.query).map_err(|e| anyhow!("{e}"))?;
        let poset = query_to_poset(&query, vocab).map_err(|e| anyhow!("{e}"))?;
        let sketch = extract_sketch(&poset, map).map_err(|e| anyhow!("{e}"))?;
        let question = tokenize(&record.question);

        let gold: BTreeSet<Vec<Label>> = poset
            .maximal_paths()
            .map_err(|e| anyhow!("{e}"))?
            .into_iter()
            .map(|p| p.label_seq().to_vec())
            .collect();

        let mut primitives = table.predict(&question, config.primitive_threshold, map);
        let gold_prims = gold_primitives(&poset, map);
        primitives.predicates.extend(gold_prims.predicates.iter().cloned());
        primitives.entities.extend(gold_prims.entities.iter().cloned());

        let candidates = hpd_core::decode::enumerate_candidates(&sketch, &primitives, map)
            .map_err(|e| anyhow!("{e}"))?;
        let negatives: Vec<Vec<Label>> = candidates
            .into_iter()
            .map(|c| c.labels)
            .filter(|labels| !gold.contains(labels))
            .collect();
        if negatives.is_empty() {
            continue; // nothing to discriminate on this instance
        }
        data.push(PathScorerExample {
            question,
            positives: gold.into_iter().collect(),
            negatives,
        });
    }
    if data.is_empty() {
        bail!("no training instance produced both positive and negative paths");
    }
    Ok(data)
}

struct LoadedModels {
    sketch: Option<SketchModel>,
    table: Option<PhraseTable>,
    scorer: Option<hpd_core::neural::PathScorerParams>,
    vocab: Option<Vocabulary>,
}

fn load_models(args: &ModelArgs) -> Result<LoadedModels> {
    let sketch = args.sketch_model.as_ref().map(|stem| load_sketch_model(stem)).transpose()?;
    let table = args
        .table
        .as_ref()
        .map(|path| -> Result<PhraseTable> {
            Ok(PhraseTable::from_tsv(
                &std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?,
            )?)
        })
        .transpose()?;
    let scorer = args.scorer.as_ref().map(|path| load_path_scorer(path)).transpose()?;
    let vocab = match (&args.vocab, &args.sketch_model) {
        (Some(path), _) => Some(load_vocab(path)?),
        (None, Some(stem)) => {
            let path = vocab_path(stem);
            path.exists().then(|| load_vocab(&path)).transpose()?
        }
        _ => None,
    };
    Ok(LoadedModels { sketch, table, scorer, vocab })
}

fn build_setup<'a>(
    args: &ModelArgs,
    models: &'a LoadedModels,
    map: &'a AbstractionMap,
    vocab: &'a Vocabulary,
    config: &AppConfig,
) -> Result<PipelineSetup<'a>> {
    let sketch = if args.oracle_sketch {
        SketchStage::Oracle
    } else {
        SketchStage::Model(
            models.sketch.as_ref().ok_or_else(|| anyhow!("--sketch-model required (or --oracle-sketch)"))?,
        )
    };
    let primitives = if args.oracle_primitives {
        PrimitiveStage::Oracle
    } else {
        PrimitiveStage::Table {
            table: models
                .table
                .as_ref()
                .ok_or_else(|| anyhow!("--table required (or --oracle-primitives)"))?,
            threshold: config.primitive_threshold,
        }
    };
    let paths = if args.oracle_paths {
        PathStage::Oracle
    } else {
        PathStage::Trained {
            params: models
                .scorer
                .as_ref()
                .ok_or_else(|| anyhow!("--scorer required (or --oracle-paths)"))?,
            table: models
                .table
                .as_ref()
                .ok_or_else(|| anyhow!("--table required for the trained path scorer"))?,
        }
    };
    Ok(PipelineSetup {
        sketch,
        primitives,
        paths,
        map,
        vocab,
        limits: config.limits.into(),
        select_meta: config.select_meta.clone(),
    })
}

fn predict(args: &PredictArgs, config: &AppConfig) -> Result<ExitCode> {
    let models = load_models(&args.models)?;
    let vocab = models
        .vocab
        .clone()
        .ok_or_else(|| anyhow!("--vocab (or a vocab file next to the sketch model) is required"))?;
    let map = AbstractionMap::predicate_entity(&vocab).map_err(|e| anyhow!("{e}"))?;
    let question = tokenize(&args.question);

    let model = models
        .sketch
        .as_ref()
        .ok_or_else(|| anyhow!("predict requires --sketch-model"))?;
    let table = models.table.as_ref().ok_or_else(|| anyhow!("predict requires --table"))?;
    let scorer_params =
        models.scorer.as_ref().ok_or_else(|| anyhow!("predict requires --scorer"))?;

    let sketch_stage =
        hpd_core::harness::ModelSketchPredictor { model, map: &map, limits: config.limits.into() };
    let primitive_stage = hpd_core::harness::TablePrimitivePredictor {
        table,
        threshold: config.primitive_threshold,
        map: &map,
    };
    let path_stage =
        hpd_core::harness::TrainedPathScorer { params: scorer_params, table, map: &map };

    match hpd_core::decode::hpd_predict(
        &question,
        &sketch_stage,
        &primitive_stage,
        &path_stage,
        &map,
        &vocab,
        &config.select_meta,
        &config.limits.into(),
    ) {
        Ok(output) => {
            println!("{}", output.query.canonical_text());
            if let Some(path) = &args.trace_out {
                write_json(path, &output.trace)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            eprintln!("prediction failed at {:?}: {}", failure.stage, failure.message);
            if let Some(path) = &args.trace_out {
                write_json(path, &failure.trace)?;
            }
            Ok(ExitCode::from(1))
        }
    }
}

fn eval(args: &EvalArgs, config: &AppConfig, strict: bool, breakdown: bool) -> Result<ExitCode> {
    let records = load_records(&args.data, config, strict)?;
    let subset = split_records(&records, args.split);
    if subset.is_empty() {
        bail!("split {} is empty in {}", args.split, args.data.display());
    }
    let models = load_models(&args.models)?;
    // The task vocabulary comes from the full dataset so train-only tokens
    // are known during dev/test evaluation.
    let vocab = match &models.vocab {
        Some(v) => v.clone(),
        None => vocab_from_records(&records)?,
    };
    let map = AbstractionMap::predicate_entity(&vocab).map_err(|e| anyhow!("{e}"))?;
    let setup = build_setup(&args.models, &models, &map, &vocab, config)?;

    let started = Instant::now();
    let (report, eval_report) = run_breakdown(&subset, &setup)?;
    eprintln!("evaluated {} instances in {:.1?}", subset.len(), started.elapsed());

    if breakdown {
        println!("split: {}  instances: {}", args.split, report.instances);
        println!("sketch accuracy      {:>8.4}", report.sketch_accuracy);
        println!(
            "primitive P/R/F1     {:>8.4} {:>8.4} {:>8.4}",
            report.primitive_precision, report.primitive_recall, report.primitive_f1
        );
        println!(
            "path P/R/F1          {:>8.4} {:>8.4} {:>8.4}",
            report.path_precision, report.path_recall, report.path_f1
        );
        println!("exact match          {:>8.4}", report.exact_match);
        println!("failures             {:>8}", report.failures);
        for (stage, count) in &report.attribution {
            println!("  first failing: {stage:<12} {count}");
        }
        if let Some(path) = &args.report {
            write_json(path, &report)?;
        }
    } else {
        println!(
            "split: {}  instances: {}  exact matches: {}  exact match: {:.4}",
            args.split, eval_report.instances, eval_report.exact_matches, eval_report.exact_match
        );
        if let Some(path) = &args.report {
            write_json(path, &eval_report)?;
        }
    }

    if report.failures > 0 {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
