//! Command-line front end.
//!
//! Every option can also come from a TOML file passed with `--config`. Keys
//! are the long flag names (`min-hits = 2`); a `[filter]`-style table named
//! after the subcommand overrides top-level keys. Flags given on the command
//! line win over the file. Each run writes the fully resolved options to
//! `effective_config.toml` in its output directory, in a form that can be fed
//! back through `--config`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{
    cost_report, retention_report, sweep_with_scores, write_sweep_csv, CostModel, Histogram,
    Stage, SweepStrategy,
};
use crate::corpus_io::{read_corpus, Annotations, CorpusFormat, CorpusStats, CorpusWriter, Document, JsonlWriter};
use crate::domain_vector::{
    aggregate_domain_vector, run_residual_experiment, verify_mean_minimizer, DomainLexicon,
    DomainVector,
};
use crate::embedding_store::{load_embeddings, EmbeddingTable};
use crate::error::Error;
use crate::parallel::{default_workers, next_chunk, thread_pool, DEFAULT_CHUNK};
use crate::stage1_filter::{filter_corpus, Stage1Config, Stage1Filter, Strategy, DEFAULT_TAU};
use crate::stage2_quality::{
    build_scorer, score_documents, QualityScore, Scorer, ScorerKind, ScoringSummary, Stage2Config,
    DEFAULT_ETA,
};

#[derive(Debug, Parser)]
#[command(name = "curate", version, about = "Two-stage domain corpus curation")]
pub struct Cli {
    /// TOML file supplying defaults for any option.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a domain vector from a lexicon and an embedding table.
    BuildVector(BuildVectorArgs),
    /// Run stage 1, stage 2 or both over a corpus.
    Filter(FilterArgs),
    /// Score a corpus and report the score distribution.
    Score(ScoreArgs),
    /// Residual-error experiment and mean-minimizer check for a lexicon.
    AnalyzeResiduals(ResidualArgs),
    /// Retention and quality across a grid of thresholds.
    Sweep(SweepArgs),
    /// Time and cost estimates for one-stage and two-stage runs.
    Cost(CostArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildVector(_) => "build-vector",
            Command::Filter(_) => "filter",
            Command::Score(_) => "score",
            Command::AnalyzeResiduals(_) => "analyze-residuals",
            Command::Sweep(_) => "sweep",
            Command::Cost(_) => "cost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum StageSelection {
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
    #[value(name = "both")]
    #[serde(rename = "both")]
    Both,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct BuildVectorArgs {
    /// Lexicon file (one term per line) or `builtin:<domain>`.
    #[arg(long)]
    pub lexicon: Option<String>,
    /// Embedding table in GloVe text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct FilterArgs {
    /// Which stages to run [default: 1]
    #[arg(long)]
    pub stage: Option<StageSelection>,
    /// JSONL file, directory of JSONL files, or text directory.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [default: jsonl]
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Lexicon file or `builtin:<domain>`.
    #[arg(long)]
    pub lexicon: Option<String>,
    /// Prebuilt domain vector (JSON); built from the lexicon when absent.
    #[arg(long)]
    pub vector: Option<PathBuf>,
    /// Stage-1 strategy [default: embedding]
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Similarity threshold; kept iff similarity > tau [default: 0.2]
    #[arg(long)]
    pub tau: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub min_tokens_in_vocab: Option<usize>,
    /// Keyword strategy: minimum lexicon hits [default: 1]
    #[arg(long)]
    pub min_hits: Option<usize>,
    /// Quality threshold; kept iff score >= eta [default: 3]
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub scorer: Option<ScorerKind>,
    /// Base URL of the scoring service.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Remote scorer: batches in flight [default: 4]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Worker threads [default: logical CPUs]
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [default: jsonl]
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub scorer: Option<ScorerKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Needed by the mock scorer.
    #[arg(long)]
    pub lexicon: Option<String>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 4]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// [default: logical CPUs]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Histogram bin width; must divide 5 [default: 0.5]
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ResidualArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<String>,
    /// Sample sizes [default: 5,10,25,50,100]
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// [default: 200]
    #[arg(long)]
    pub trials: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random perturbations tried around the mean [default: 64]
    #[arg(long)]
    pub probes: Option<usize>,
    /// Bins of the component histogram [default: 50]
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [default: jsonl]
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    /// One or more embedding tables, each swept separately.
    #[arg(long, value_delimiter = ',')]
    pub embeddings: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub lexicon: Option<String>,
    /// Strategies to sweep [default: embedding,keyword,none]
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// [default: 0,0.1,0.2,0.3,0.4]
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// [default: 1,2,3,5]
    #[arg(long, value_delimiter = ',')]
    pub min_hits: Option<Vec<usize>>,
    /// [default: mock]
    #[arg(long)]
    pub scorer: Option<ScorerKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 4]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// [default: logical CPUs]
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct CostArgs {
    /// Stage-1 hours over the full corpus [default: 177]
    #[arg(long)]
    pub stage1_hours: Option<f64>,
    /// Stage-1 cost per hour [default: 44/177]
    #[arg(long)]
    pub stage1_rate: Option<f64>,
    /// Stage-2 hours over the full corpus [default: 12000]
    #[arg(long)]
    pub stage2_hours: Option<f64>,
    /// Stage-2 cost per hour [default: 1.35]
    #[arg(long)]
    pub stage2_rate: Option<f64>,
    /// Fraction kept by stage 1 [default: 0.01]
    #[arg(long)]
    pub retention: Option<f64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A failed run: usage problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Lexicon(_) | Error::SampleTooLarge { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

fn required<T>(value: Option<T>, flag: &str) -> Outcome<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn existing(path: Option<PathBuf>, flag: &str) -> Outcome<PathBuf> {
    let path = required(path, flag)?;
    if !path.exists() {
        return Err(usage(format!("--{flag}: {} does not exist", path.display())));
    }
    Ok(path)
}

/// Parses `std::env::args`, runs, logs any failure and returns the exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            log::error!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(path) => load_config(path, cli.command.name())?,
        None => serde_json::Map::new(),
    };
    match cli.command {
        Command::BuildVector(a) => build_vector(merge(&a, &file)?),
        Command::Filter(a) => filter(merge(&a, &file)?),
        Command::Score(a) => score(merge(&a, &file)?),
        Command::AnalyzeResiduals(a) => analyze_residuals(merge(&a, &file)?),
        Command::Sweep(a) => sweep(merge(&a, &file)?),
        Command::Cost(a) => cost(merge(&a, &file)?),
    }
}

/// Top-level keys of the TOML file, overlaid with the table named after the
/// subcommand.
fn load_config(path: &Path, command: &str) -> Outcome<serde_json::Map<String, Value>> {
    let body = fs::read_to_string(path)
        .map_err(|e| usage(format!("--config: cannot read {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&body)
        .map_err(|e| usage(format!("--config: {}: {e}", path.display())))?;
    let Value::Object(mut merged) = serde_json::to_value(&table).map_err(Error::from)? else {
        unreachable!("a TOML table serializes to an object");
    };
    if let Some(Value::Object(section)) = merged.remove(command) {
        merged.extend(section);
    }
    Ok(merged)
}

fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: &serde_json::Map<String, Value>) -> Outcome<T> {
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).map_err(Error::from)? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| usage(format!("--config: {e}")))
}

fn prepare_output(output: &Path, command: &str, effective: &impl Serialize) -> Outcome {
    fs::create_dir_all(output)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", output.display())))?;
    let body = toml::to_string(effective)
        .map_err(|e| Failure::Runtime(format!("cannot serialize configuration: {e}")))?;
    let path = output.join("effective_config.toml");
    fs::write(&path, format!("# curate {command}\n{body}"))
        .map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let body = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn load_table(path: &Path) -> Outcome<EmbeddingTable> {
    log::info!("loading embeddings from {}", path.display());
    let table = load_embeddings(path)?;
    log::info!(
        "{} vectors of dimension {} ({} zero vectors dropped, {} duplicates ignored)",
        table.vocab_size(),
        table.dimension(),
        table.dropped_zero_vectors(),
        table.duplicate_words()
    );
    Ok(table)
}

fn build_vector(mut a: BuildVectorArgs) -> Outcome {
    let lexicon = DomainLexicon::resolve(&required(a.lexicon.clone(), "lexicon")?)?;
    let embeddings = existing(a.embeddings.clone(), "embeddings")?;
    let output = a.output.get_or_insert_with(|| PathBuf::from(".")).clone();
    prepare_output(&output, "build-vector", &a)?;

    let table = load_table(&embeddings)?;
    let vector = aggregate_domain_vector(&table, &lexicon)?;
    log::info!(
        "domain vector for {}: {} of {} terms found",
        vector.source_domain,
        vector.terms_found,
        lexicon.len()
    );
    vector.save(output.join("domain_vector.json"))?;
    Ok(())
}

fn resolve_workers(workers: &mut Option<usize>) -> Outcome<usize> {
    let n = *workers.get_or_insert_with(default_workers);
    if n == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    Ok(n)
}

fn stage2_config(
    scorer: Option<ScorerKind>,
    endpoint: &Option<String>,
    eta: f64,
    batch_size: usize,
    concurrency: usize,
) -> Outcome<Stage2Config> {
    let cfg = Stage2Config {
        eta,
        batch_size,
        scorer: required(scorer, "scorer")?,
        endpoint: endpoint.clone(),
        concurrency,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn scorer_for(cfg: &Stage2Config, lexicon: Option<&DomainLexicon>) -> Outcome<Box<dyn Scorer>> {
    if cfg.scorer == ScorerKind::Mock && lexicon.is_none() {
        return Err(usage("the mock scorer needs --lexicon"));
    }
    Ok(build_scorer(cfg, lexicon)?)
}

/// Remote scoring is I/O-bound, so it gets its own pool sized by
/// `concurrency`; local scorers share the worker count.
fn scoring_pool(cfg: &Stage2Config, workers: usize) -> Outcome<rayon::ThreadPool> {
    let width = match cfg.scorer {
        ScorerKind::Remote => cfg.concurrency,
        ScorerKind::Mock => workers,
    };
    Ok(thread_pool(width)?)
}

/// Stage-2 sink for the filter pipeline. Buffers stage-1 survivors, scores
/// them a chunk at a time and writes the survivors in input order.
struct Gate<'a> {
    scorer: Option<(&'a dyn Scorer, &'a rayon::ThreadPool, &'a Stage2Config)>,
    pending: Vec<(Document, Option<f64>)>,
    retained: CorpusWriter,
    scores: Option<JsonlWriter>,
    scored: CorpusStats,
    kept: CorpusStats,
    summary: ScoringSummary,
}

impl Gate<'_> {
    fn push(&mut self, doc: Document, similarity: Option<f64>) -> Outcome {
        self.pending.push((doc, similarity));
        if self.pending.len() >= DEFAULT_CHUNK {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Outcome {
        let pending = std::mem::take(&mut self.pending);
        let Some((scorer, pool, cfg)) = self.scorer else {
            for (doc, similarity) in &pending {
                self.kept.record(doc);
                self.retained.write(doc, annotations(*similarity, None).as_ref())?;
            }
            return Ok(());
        };
        if pending.is_empty() {
            return Ok(());
        }
        let docs: Vec<Document> = pending.iter().map(|(d, _)| d.clone()).collect();
        let (scores, summary) = score_documents(&docs, scorer, cfg.batch_size, pool)?;
        self.summary += summary;
        let writer = self.scores.as_mut().expect("stage 2 writes scores");
        for ((doc, similarity), score) in pending.iter().zip(&scores) {
            self.scored.record(doc);
            writer.write(score)?;
            if score.passes(cfg.eta) {
                self.kept.record(doc);
                self.retained.write(doc, annotations(*similarity, Some(score)).as_ref())?;
            }
        }
        Ok(())
    }
}

fn annotations(similarity: Option<f64>, score: Option<&QualityScore>) -> Option<Annotations> {
    if similarity.is_none() && score.is_none() {
        return None;
    }
    let mut a = Annotations::new();
    if let Some(s) = similarity {
        a.insert("similarity".into(), json!(s));
    }
    if let Some(s) = score {
        a.insert("edu_score".into(), json!(s.score));
    }
    Some(a)
}

fn filter(mut a: FilterArgs) -> Outcome {
    let stage = *a.stage.get_or_insert(StageSelection::One);
    let run_stage1 = stage != StageSelection::Two;
    let run_stage2 = stage != StageSelection::One;
    let corpus = existing(a.corpus.clone(), "corpus")?;
    let format = *a.format.get_or_insert_with(CorpusFormat::default);
    let output = required(a.output.clone(), "output")?;
    let workers = resolve_workers(&mut a.workers)?;

    let lexicon = a.lexicon.as_deref().map(DomainLexicon::resolve).transpose()?;
    let mut table = None;
    let mut domain = None;
    let mut stage1 = Stage1Config::default();
    if run_stage1 {
        stage1 = Stage1Config {
            tau: *a.tau.get_or_insert(DEFAULT_TAU),
            min_tokens_in_vocab: *a.min_tokens_in_vocab.get_or_insert(1),
            strategy: *a.strategy.get_or_insert(Strategy::Embedding),
            min_hits: *a.min_hits.get_or_insert(1),
        };
        stage1.validate()?;
        match stage1.strategy {
            Strategy::Embedding => {
                let path = existing(a.embeddings.clone(), "embeddings")?;
                if a.vector.is_none() && lexicon.is_none() {
                    return Err(usage("the embedding strategy needs --vector or --lexicon"));
                }
                table = Some(load_table(&path)?);
            }
            Strategy::Keyword if lexicon.is_none() => {
                return Err(usage("the keyword strategy needs --lexicon"));
            }
            _ => {}
        }
    }
    let stage2 = if run_stage2 {
        let cfg = stage2_config(
            a.scorer,
            &a.endpoint,
            *a.eta.get_or_insert(DEFAULT_ETA),
            *a.batch_size.get_or_insert(32),
            *a.concurrency.get_or_insert(4),
        )
        .map_err(|e| match e {
            Failure::Usage(m) => usage(format!("stage 2: {m}")),
            other => other,
        })?;
        Some(cfg)
    } else {
        None
    };
    prepare_output(&output, "filter", &a)?;

    if let Some(table) = &table {
        let vector = match &a.vector {
            Some(path) => DomainVector::load(path)?,
            None => aggregate_domain_vector(table, lexicon.as_ref().expect("checked above"))?,
        };
        log::info!(
            "domain vector for {}: {} terms, dimension {}",
            vector.source_domain,
            vector.terms_found,
            vector.dimension
        );
        domain = Some(vector);
    }
    let stage1_filter = if run_stage1 {
        Stage1Filter::new(stage1, table.as_ref(), domain.as_ref(), lexicon.as_ref())?
    } else {
        Stage1Filter::PassThrough
    };
    let scorer = stage2
        .as_ref()
        .map(|cfg| scorer_for(cfg, lexicon.as_ref()))
        .transpose()?;
    let pool = stage2
        .as_ref()
        .map(|cfg| scoring_pool(cfg, workers))
        .transpose()?;

    let mut reader = read_corpus(&corpus, format)?;
    let mut decisions = if run_stage1 {
        Some(JsonlWriter::create(output.join("decisions.jsonl"))?)
    } else {
        None
    };
    let mut gate = Gate {
        scorer: match (&scorer, &pool, &stage2) {
            (Some(s), Some(p), Some(c)) => Some((s.as_ref(), p, c)),
            _ => None,
        },
        pending: Vec::new(),
        retained: CorpusWriter::create(output.join("retained.jsonl"))?,
        scores: if run_stage2 {
            Some(JsonlWriter::create(output.join("scores.jsonl"))?)
        } else {
            None
        },
        scored: CorpusStats::default(),
        kept: CorpusStats::default(),
        summary: ScoringSummary::default(),
    };
    let mut failure = None;
    let summary = filter_corpus(&stage1_filter, reader.by_ref(), workers, |doc, decision| {
        if let Some(w) = decisions.as_mut() {
            w.write(&decision)?;
        }
        if decision.retained {
            let similarity = run_stage1.then_some(decision.similarity);
            if let Err(f) = gate.push(doc, similarity) {
                failure = Some(f);
                return Err(Error::Inconsistent("stage 2 failed".into()));
            }
        }
        Ok(())
    });
    if let Some(f) = failure {
        return Err(f);
    }
    let summary = summary?;
    gate.flush()?;

    let mut skipped = JsonlWriter::create(output.join("skipped.jsonl"))?;
    for record in reader.skipped() {
        skipped.write(record)?;
    }
    skipped.finish()?;
    if let Some(w) = decisions {
        w.finish()?;
    }
    if let Some(w) = gate.scores.take() {
        w.finish()?;
    }
    let written = gate.retained.finish()?;

    let input = summary.before;
    let mut reports = Vec::new();
    if run_stage1 {
        reports.push(retention_report(input, summary.after, Stage::Stage1)?);
    }
    if run_stage2 {
        reports.push(retention_report(gate.scored, gate.kept, Stage::Stage2)?);
    }
    if run_stage1 && run_stage2 {
        reports.push(retention_report(input, written, Stage::Combined)?);
    }
    for r in &reports {
        log::info!(
            "{:?}: {} -> {} documents ({:.4}), {} -> {} tokens ({:.4})",
            r.stage,
            r.docs_in,
            r.docs_out,
            r.retention_docs,
            r.tokens_in,
            r.tokens_out,
            r.retention_tokens
        );
    }
    if !reader.skipped().is_empty() {
        log::warn!("{} malformed records skipped", reader.skipped().len());
    }
    let mut report = json!({
        "reports": reports,
        "skipped_records": reader.skipped().len(),
    });
    if run_stage2 {
        report["scoring"] = json!(gate.summary);
    }
    write_json(&output.join("retention.json"), &report)
}

fn score(mut a: ScoreArgs) -> Outcome {
    let corpus = existing(a.corpus.clone(), "corpus")?;
    let format = *a.format.get_or_insert_with(CorpusFormat::default);
    let output = required(a.output.clone(), "output")?;
    let workers = resolve_workers(&mut a.workers)?;
    let bin_width = *a.bin_width.get_or_insert(0.5);
    let mut histogram = Histogram::new(bin_width)?;
    let cfg = stage2_config(
        a.scorer,
        &a.endpoint,
        DEFAULT_ETA,
        *a.batch_size.get_or_insert(32),
        *a.concurrency.get_or_insert(4),
    )?;
    let lexicon = a.lexicon.as_deref().map(DomainLexicon::resolve).transpose()?;
    let scorer = scorer_for(&cfg, lexicon.as_ref())?;
    let pool = scoring_pool(&cfg, workers)?;
    prepare_output(&output, "score", &a)?;

    let mut reader = read_corpus(&corpus, format)?;
    let mut writer = JsonlWriter::create(output.join("scores.jsonl"))?;
    let mut summary = ScoringSummary::default();
    loop {
        let chunk = next_chunk(&mut reader, DEFAULT_CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let (scores, s) = score_documents(&chunk, scorer.as_ref(), cfg.batch_size, &pool)?;
        summary += s;
        for score in &scores {
            writer.write(score)?;
            if !score.error {
                histogram.add(score.score);
            }
        }
    }
    writer.finish()?;
    histogram.write_csv(output.join("score_histogram.csv"))?;
    log::info!(
        "scored {} documents ({} failed, {} clamped, {} malformed records skipped)",
        summary.scored,
        summary.failed,
        summary.clamped,
        reader.skipped().len()
    );
    Ok(())
}

fn analyze_residuals(mut a: ResidualArgs) -> Outcome {
    let lexicon = DomainLexicon::resolve(&required(a.lexicon.clone(), "lexicon")?)?;
    let embeddings = existing(a.embeddings.clone(), "embeddings")?;
    let output = required(a.output.clone(), "output")?;
    let m = a.m.get_or_insert_with(|| vec![5, 10, 25, 50, 100]).clone();
    let trials = *a.trials.get_or_insert(200);
    let seed = *a.seed.get_or_insert(0);
    let probes = *a.probes.get_or_insert(64);
    let bins = *a.bins.get_or_insert(50);
    if bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    prepare_output(&output, "analyze-residuals", &a)?;

    let table = load_table(&embeddings)?;
    let report = run_residual_experiment(&table, &lexicon, &m, trials, seed)?;
    for (m, norm) in report.m_values.iter().zip(&report.mean_error_norms) {
        log::info!("m = {m}: mean ||E|| = {norm:.6}");
    }
    write_json(&output.join("residual_report.json"), &report)?;
    report.write_component_csv(output.join("residual_components.csv"), bins)?;

    let minimizer = verify_mean_minimizer(&table, &lexicon, probes, seed)?;
    log::info!(
        "mean minimizer check {}: gradient norm {:.3e}, {} of {} probes lower",
        if minimizer.passed { "passed" } else { "FAILED" },
        minimizer.gradient_norm,
        minimizer.violations,
        minimizer.probes
    );
    write_json(&output.join("mean_minimizer.json"), &minimizer)
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn sweep(mut a: SweepArgs) -> Outcome {
    let corpus = existing(a.corpus.clone(), "corpus")?;
    let format = *a.format.get_or_insert_with(CorpusFormat::default);
    let output = required(a.output.clone(), "output")?;
    let lexicon = DomainLexicon::resolve(&required(a.lexicon.clone(), "lexicon")?)?;
    let workers = resolve_workers(&mut a.workers)?;
    let strategies = a
        .strategies
        .get_or_insert_with(|| vec![Strategy::Embedding, Strategy::Keyword, Strategy::None])
        .clone();
    let mut taus = a.taus.get_or_insert_with(|| vec![0.0, 0.1, 0.2, 0.3, 0.4]).clone();
    let mut min_hits = a.min_hits.get_or_insert_with(|| vec![1, 2, 3, 5]).clone();
    taus.sort_by(f64::total_cmp);
    min_hits.sort_unstable();
    let embeddings = if strategies.contains(&Strategy::Embedding) {
        let paths = required(a.embeddings.clone().filter(|p| !p.is_empty()), "embeddings")?;
        for p in &paths {
            existing(Some(p.clone()), "embeddings")?;
        }
        paths
    } else {
        Vec::new()
    };
    let cfg = stage2_config(
        Some(*a.scorer.get_or_insert(ScorerKind::Mock)),
        &a.endpoint,
        DEFAULT_ETA,
        *a.batch_size.get_or_insert(32),
        *a.concurrency.get_or_insert(4),
    )?;
    let scorer = scorer_for(&cfg, Some(&lexicon))?;
    prepare_output(&output, "sweep", &a)?;

    let mut reader = read_corpus(&corpus, format)?;
    let docs: Vec<Document> = reader.by_ref().collect::<crate::Result<_>>()?;
    log::info!("{} documents loaded", docs.len());
    let pool = thread_pool(workers)?;
    let (scores, _) = score_documents(&docs, scorer.as_ref(), cfg.batch_size, &scoring_pool(&cfg, workers)?)?;

    let mut tables = Vec::new();
    for path in &embeddings {
        let table = load_table(path)?;
        let vector = aggregate_domain_vector(&table, &lexicon)?;
        tables.push((file_label(path), table, vector));
    }
    let mut plan = Vec::new();
    for strategy in &strategies {
        match strategy {
            Strategy::Embedding => {
                for (label, table, domain) in &tables {
                    plan.push((
                        SweepStrategy::Embedding {
                            label,
                            table,
                            domain,
                        },
                        taus.clone(),
                    ));
                }
            }
            Strategy::Keyword => plan.push((
                SweepStrategy::Keyword { lexicon: &lexicon },
                min_hits.iter().map(|&h| h as f64).collect(),
            )),
            Strategy::None => plan.push((SweepStrategy::NoFilter, vec![0.0])),
        }
    }
    let results = sweep_with_scores(&docs, &scores, &plan, &pool)?;
    write_sweep_csv(output.join("sweep.csv"), &results)?;
    log::info!("{} sweep rows written", results.len());
    Ok(())
}

fn cost(mut a: CostArgs) -> Outcome {
    let reference = CostModel::default();
    let model = CostModel {
        stage1_rate_per_hour: *a.stage1_rate.get_or_insert(reference.stage1_rate_per_hour),
        stage2_rate_per_hour: *a.stage2_rate.get_or_insert(reference.stage2_rate_per_hour),
        stage1_hours_full_corpus: *a.stage1_hours.get_or_insert(reference.stage1_hours_full_corpus),
        stage2_hours_full_corpus: *a.stage2_hours.get_or_insert(reference.stage2_hours_full_corpus),
        stage1_retention: *a.retention.get_or_insert(reference.stage1_retention),
    };
    let report = cost_report(&model)?;
    let output = a.output.get_or_insert_with(|| PathBuf::from(".")).clone();
    prepare_output(&output, "cost", &a)?;
    for e in &report.estimates {
        log::info!("{:?}: {} h, ${:.2}", e.scenario, e.hours, e.cost);
    }
    write_json(&output.join("cost.json"), &report)
}
