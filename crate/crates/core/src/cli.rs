//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 insufficient topics, 5 I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::anchor::{select_anchors, sweep, write_sweep, AnchorConfig};
use crate::error::{Error, Result};
use crate::interchange::{load_corpus, load_embeddings, load_run, validate_run, Corpus, RunRecord, Source};
use crate::metrics::{metric_report, write_csv, MetricReport, NfsMode, ReportConfig};
use crate::rundb::{write_table6_csv, Filter, GroupKey, Runstore};
use crate::stability::{stability_score_with, update_lookup_with, StabilityConfig, TopicNameLookup};
use crate::stats::{correlate_runs, descriptives, write_correlation_csv, write_descriptives_csv};
use crate::textproc::{extract_ngrams, TokenizerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INSUFFICIENT_TOPICS: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::InsufficientTopics { .. } | Error::InsufficientNgrams { .. } => EXIT_INSUFFICIENT_TOPICS,
        Error::Config(_) => EXIT_USAGE,
        Error::Format { .. }
        | Error::Validation(_)
        | Error::UndefinedMetric(_)
        | Error::UndefinedCorrelation(_)
        | Error::EmptyAnchors
        | Error::Conflict(_) => EXIT_VALIDATION,
    }
}

#[derive(Debug, Parser)]
#[command(name = "topicscope", version, about = "Evaluate topic-model runs and run the anchor topic model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate corpus, run and embedding files; optionally export the n-gram table or store runs
    Ingest(IngestArgs),
    /// Compute the metric report of one or more runs as CSV
    Eval(EvalArgs),
    /// Sweep the anchor model over cosine thresholds
    Sweep(SweepArgs),
    /// Score a run's topic names against a lookup of earlier names
    Stability(StabilityArgs),
    /// Descriptives or Spearman correlation over stored runs
    Stats(StatsArgs),
    /// Unique-value counts of a metric over stored runs, per group
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TokenizerArgs {
    /// Smallest n-gram length
    #[arg(long, default_value_t = 1)]
    pub ngram_lo: usize,
    /// Largest n-gram length (at most 3)
    #[arg(long, default_value_t = 2)]
    pub ngram_hi: usize,
    /// Minimum corpus count for an n-gram to be kept
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    /// Keep original letter case
    #[arg(long)]
    pub keep_case: bool,
}

impl TokenizerArgs {
    fn config(&self) -> Result<TokenizerConfig> {
        let c = TokenizerConfig {
            lowercase: !self.keep_case,
            ngram_range: (self.ngram_lo, self.ngram_hi),
            min_count: self.min_count,
            ..TokenizerConfig::default()
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// Number of largest topics scored
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Scored n-grams per topic
    #[arg(long, default_value_t = 10)]
    pub ngrams_per_topic: usize,
    /// Divide NFS by the corpus n-gram count instead of the selection size
    #[arg(long)]
    pub nfs_corpus_normalized: bool,
}

impl SelectionArgs {
    fn config(&self) -> ReportConfig {
        ReportConfig {
            top_k: self.top_k,
            ngrams_per_topic: self.ngrams_per_topic,
            nfs_mode: if self.nfs_corpus_normalized {
                NfsMode::CorpusNormalized
            } else {
                NfsMode::Mean
            },
            ..ReportConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run file(s) to validate against the corpus
    #[arg(long)]
    pub run: Vec<PathBuf>,
    /// Directory of run files (*.json)
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Evaluate the runs and append them to this store
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Write the corpus n-gram table here as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub run: Vec<PathBuf>,
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
    /// Also append evaluated runs to this store
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Append every sweep run to this store
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Directory receiving runs/<run_id>.json and metrics.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.30)]
    pub threshold_lo: f64,
    #[arg(long, default_value_t = 1.00)]
    pub threshold_hi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub threshold_step: f64,
    /// Anchor candidates: this many most frequent multi-word n-grams
    #[arg(long, default_value_t = 20)]
    pub top_ngrams: usize,
    /// Unigrams ranked within this cutoff may not appear in anchor sentences
    #[arg(long, default_value_t = 50)]
    pub unigram_cutoff: usize,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Lookup file; defaults to <store>/lookup.json
    #[arg(long)]
    pub lookup: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Largest word error rate still counted as a match
    #[arg(long, default_value_t = 0.5)]
    pub wer_threshold: f64,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Add this run's topic names to the lookup after scoring
    #[arg(long)]
    pub update: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub corpus_id: Option<String>,
    /// bertopic, top2vec, lda, anchor or other
    #[arg(long)]
    pub source: Option<String>,
}

impl FilterArgs {
    fn filter(&self) -> Result<Filter> {
        Ok(Filter {
            corpus_id: self.corpus_id.clone(),
            source: self.source.as_deref().map(str::parse::<Source>).transpose()?,
            params: Vec::new(),
        })
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Metric column for the x axis of a correlation
    #[arg(long, requires = "y_field")]
    pub x_field: Option<String>,
    #[arg(long, requires = "x_field")]
    pub y_field: Option<String>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Group by corpus and/or source
    #[arg(long)]
    pub group_by: Vec<String>,
    #[arg(long, default_value = "nuv")]
    pub metric: String,
    /// Decimal places kept before counting distinct values
    #[arg(long, default_value_t = 2)]
    pub precision: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, out, err),
        Command::Eval(a) => eval(a, out),
        Command::Sweep(a) => run_sweep(a, out, err),
        Command::Stability(a) => stability(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Report(a) => report(a, out),
    }
}

/// Writes to `path` when given, otherwise to `out`.
fn emit(path: Option<&Path>, out: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => out.write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run_paths(files: &[PathBuf], dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut paths = files.to_vec();
    if let Some(dir) = dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        found.sort();
        paths.extend(found);
    }
    Ok(paths)
}

fn load_checked_run(path: &Path, corpus: &Corpus) -> Result<RunRecord> {
    let loaded = load_run(path)?;
    validate_run(&loaded.run, corpus).into_result()?;
    Ok(loaded.run)
}

fn evaluate(corpus: &Corpus, paths: &[PathBuf], tokenizer: &TokenizerConfig, config: &ReportConfig) -> Result<Vec<(RunRecord, MetricReport)>> {
    let table = extract_ngrams(corpus, tokenizer);
    paths
        .iter()
        .map(|p| {
            let run = load_checked_run(p, corpus)?;
            let report = metric_report(&run, corpus, &table, config)?;
            Ok((run, report))
        })
        .collect()
}

fn ingest(a: IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let tokenizer = a.tokenizer.config()?;
    let corpus = load_corpus(&a.corpus)?;
    let mut lines = format!("corpus {}: {} sentences\n", corpus.corpus_id, corpus.len());
    if let Some(path) = &a.embeddings {
        let m = load_embeddings(path)?;
        m.check_corpus(&corpus)?;
        lines.push_str(&format!("embeddings: {}x{}\n", m.rows(), m.cols()));
    }
    let paths = run_paths(&a.run, a.runs_dir.as_deref())?;
    if let Some(store) = &a.store {
        let mut store = Runstore::open(store)?;
        for (run, report) in evaluate(&corpus, &paths, &tokenizer, &a.selection.config())? {
            store.append_run(&run, &report)?;
            lines.push_str(&format!("run {}: stored\n", run.run_id));
        }
    } else {
        for p in &paths {
            let loaded = load_run(p)?;
            if loaded.resorted {
                let _ = writeln!(err, "warning: {}: topics re-sorted by size", p.display());
            }
            validate_run(&loaded.run, &corpus).into_result()?;
            lines.push_str(&format!("run {}: valid\n", loaded.run.run_id));
        }
    }
    if let Some(path) = &a.out {
        let table = extract_ngrams(&corpus, &tokenizer);
        fs::write(path, table.to_json()).map_err(|e| Error::io(path, e))?;
        lines.push_str(&format!("n-gram table: {} entries\n", table.entries.len()));
    }
    emit(None, out, lines.as_bytes())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let tokenizer = a.tokenizer.config()?;
    let corpus = load_corpus(&a.corpus)?;
    let paths = run_paths(&a.run, a.runs_dir.as_deref())?;
    if paths.is_empty() {
        return Err(Error::Config("give at least one --run or a --runs-dir".into()));
    }
    let evaluated = evaluate(&corpus, &paths, &tokenizer, &a.selection.config())?;
    if let Some(store) = &a.store {
        let mut store = Runstore::open(store)?;
        for (run, report) in &evaluated {
            store.append_run(run, report)?;
        }
    }
    let reports: Vec<MetricReport> = evaluated.into_iter().map(|(_, r)| r).collect();
    let mut csv = Vec::new();
    write_csv(&mut csv, &reports)?;
    emit(a.out.as_deref(), out, &csv)
}

fn run_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let tokenizer = a.tokenizer.config()?;
    let corpus = load_corpus(&a.corpus)?;
    let embeddings = load_embeddings(&a.embeddings)?;
    let config = AnchorConfig {
        top_ngrams: a.top_ngrams,
        high_value_unigram_cutoff: a.unigram_cutoff,
        threshold_lo: a.threshold_lo,
        threshold_hi: a.threshold_hi,
        threshold_step: a.threshold_step,
    };
    config.validate()?;
    let table = extract_ngrams(&corpus, &tokenizer);
    let anchors = select_anchors(&corpus, &table, &embeddings, &config)?;
    let _ = writeln!(err, "{} anchors selected", anchors.len());
    let entries = sweep(&corpus, &embeddings, &anchors, &config, &tokenizer, &a.selection.config())?;
    if let Some(dir) = &a.out {
        write_sweep(dir, &entries)?;
    }
    if let Some(store) = &a.store {
        let mut store = Runstore::open(store)?;
        for e in &entries {
            store.append_run(&e.run, &e.report)?;
        }
        let _ = writeln!(err, "{} runs appended to {}", entries.len(), store.root().display());
    }
    let mut csv = Vec::new();
    crate::metrics::write_csv_with_prefix(
        &mut csv,
        Some("threshold"),
        entries.iter().map(|e| (Some(e.threshold.to_string()), &e.report)),
    )?;
    emit(None, out, &csv)
}

fn stability(a: StabilityArgs, out: &mut dyn Write) -> Result<()> {
    let lookup_path = match (&a.lookup, &a.store) {
        (Some(p), _) => p.clone(),
        (None, Some(store)) => store.join("lookup.json"),
        (None, None) => return Err(Error::Config("give --lookup or --store".into())),
    };
    let run = load_run(&a.run)?.run;
    let mut lookup = TopicNameLookup::load_or_default(&lookup_path)?;
    let config = StabilityConfig {
        top_k: a.top_k,
        wer_threshold: a.wer_threshold,
        ..StabilityConfig::default()
    };
    let result = stability_score_with(&run, &lookup, &config)?;
    if a.update {
        update_lookup_with(&mut lookup, &run, &config);
        if let Some(parent) = lookup_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        lookup.save(&lookup_path)?;
    }
    let json = crate::interchange::to_pretty_json(&result);
    emit(a.out.as_deref(), out, &json)
}

const DESCRIPTIVE_FIELDS: [&str; 6] = ["error_size", "nfs", "gini", "topic_20_size", "nuv", "puv"];

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let store = Runstore::open_readonly(&a.store)?;
    let reports = store.query(&a.filter.filter()?);
    let mut csv = Vec::new();
    match (&a.x_field, &a.y_field) {
        (Some(x), Some(y)) => {
            let c = correlate_runs(&reports, x, y)?;
            write_correlation_csv(&mut csv, &[(format!("{x}~{y}"), c)])?;
        }
        _ => {
            let rows = DESCRIPTIVE_FIELDS
                .iter()
                .map(|f| {
                    let values: Vec<f64> = reports.iter().filter_map(|r| r.field(f)).collect();
                    Ok((f.to_string(), descriptives(&values)?))
                })
                .collect::<Result<Vec<_>>>()?;
            write_descriptives_csv(&mut csv, &rows)?;
        }
    }
    emit(a.out.as_deref(), out, &csv)
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let store = Runstore::open_readonly(&a.store)?;
    if store.is_empty() {
        return Err(Error::invalid("run store is empty"));
    }
    let keys = a
        .group_by
        .iter()
        .map(|k| k.parse::<GroupKey>())
        .collect::<Result<Vec<_>>>()?;
    let rows = store.table6(&keys, &a.metric, a.precision)?;
    let mut csv = Vec::new();
    write_table6_csv(&mut csv, &a.metric, &rows)?;
    emit(a.out.as_deref(), out, &csv)
}
