//! Deterministic anchor-sentence topic model.
//!
//! High-frequency multi-word n-grams are each represented by one anchor
//! sentence. Every sentence joins the anchor it is most cosine-similar to,
//! provided the similarity reaches a threshold; otherwise it is an outlier.
//! Sweeping the threshold trades coverage for cluster cohesion.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{save_run, Corpus, EmbeddingMatrix, RunParams, RunRecord, Source, OUTLIER};
use crate::metrics::{metric_report, write_csv_with_prefix, MetricReport, ReportConfig};
use crate::textproc::{ctfidf, extract_ngrams, ngrams, tokenize, NgramTable, TokenizerConfig};

/// Number of n-grams kept per anchor topic.
pub const TOPIC_NGRAMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// How many of the most frequent multi-word n-grams are anchor candidates.
    pub top_ngrams: usize,
    /// Unigrams ranked within this many of the most frequent are "high value".
    pub high_value_unigram_cutoff: usize,
    pub threshold_lo: f64,
    pub threshold_hi: f64,
    pub threshold_step: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            top_ngrams: 20,
            high_value_unigram_cutoff: 50,
            threshold_lo: 0.30,
            threshold_hi: 1.00,
            threshold_step: 0.01,
        }
    }
}

fn round_threshold(t: f64) -> f64 {
    (t * 1e10).round() / 1e10
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi, step) = (self.threshold_lo, self.threshold_hi, self.threshold_step);
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("threshold range must satisfy 0 < lo <= hi <= 1, got {lo}..{hi}")));
        }
        if step.is_nan() || step <= 0.0 {
            return Err(Error::Config(format!("threshold step must be positive, got {step}")));
        }
        if self.top_ngrams == 0 {
            return Err(Error::Config("top_ngrams must be positive".into()));
        }
        Ok(())
    }

    /// `lo, lo + step, ...` up to and including `hi`. Values are computed as
    /// `lo + k * step` (not by accumulation) and rounded to 10 decimals; `hi`
    /// is included when it falls within rounding error of the grid.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let span = (self.threshold_hi - self.threshold_lo) / self.threshold_step;
        let count = (span + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|k| round_threshold(self.threshold_lo + k as f64 * self.threshold_step).min(self.threshold_hi))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub ngram: String,
    pub sentence_id: usize,
    pub embedding_row: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<Anchor>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Candidate pool and high-value unigrams drawn from `table`.
pub fn high_value_terms<'a>(table: &'a NgramTable, config: &AnchorConfig) -> (Vec<&'a str>, HashSet<&'a str>) {
    let ranked = table.ranked();
    let pool = ranked
        .iter()
        .filter(|(g, _)| g.contains(' '))
        .take(config.top_ngrams)
        .map(|(g, _)| *g)
        .collect();
    let unigrams = ranked
        .iter()
        .filter(|(g, _)| !g.contains(' '))
        .take(config.high_value_unigram_cutoff)
        .map(|(g, _)| *g)
        .collect();
    (pool, unigrams)
}

/// Picks one anchor sentence per candidate n-gram.
///
/// Candidates are the `top_ngrams` most frequent multi-word n-grams of
/// `table`. A sentence qualifies for candidate `g` when it contains `g`
/// exactly once, contains no other candidate, and contains no high-value
/// unigram apart from the words of `g` itself. The lowest qualifying
/// sentence id wins; candidates without one are skipped.
pub fn select_anchors(
    corpus: &Corpus,
    table: &NgramTable,
    embeddings: &EmbeddingMatrix,
    config: &AnchorConfig,
) -> Result<AnchorSet> {
    embeddings.check_corpus(corpus)?;
    if table.corpus_id != corpus.corpus_id {
        return Err(Error::invalid("n-gram table was built from a different corpus"));
    }
    let (pool, high_unigrams) = high_value_terms(table, config);
    let pool_set: HashSet<&str> = pool.iter().copied().collect();

    struct Profile {
        tokens: HashSet<String>,
        pool_counts: HashMap<String, usize>,
    }
    let profiles: Vec<Profile> = corpus
        .texts()
        .map(|text| {
            let tokens = tokenize(text, &table.config);
            let mut pool_counts = HashMap::new();
            for g in ngrams(&tokens, (2, table.config.ngram_range.1.max(2))) {
                if pool_set.contains(g.as_str()) {
                    *pool_counts.entry(g).or_insert(0) += 1;
                }
            }
            Profile {
                tokens: tokens.into_iter().collect(),
                pool_counts,
            }
        })
        .collect();

    let mut anchors = Vec::new();
    let mut taken = HashSet::new();
    for &gram in &pool {
        let own_words: HashSet<&str> = gram.split(' ').collect();
        let found = profiles.iter().enumerate().find(|(sid, p)| {
            !taken.contains(sid)
                && p.pool_counts.get(gram) == Some(&1)
                && p.pool_counts.len() == 1
                && p
                    .tokens
                    .iter()
                    .all(|t| own_words.contains(t.as_str()) || !high_unigrams.contains(t.as_str()))
        });
        match found {
            Some((sid, _)) => {
                taken.insert(sid);
                anchors.push(Anchor {
                    ngram: gram.to_string(),
                    sentence_id: sid,
                    embedding_row: sid,
                });
            }
            None => log::warn!("no clean anchor sentence for {gram:?}; skipped"),
        }
    }
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    Ok(AnchorSet { anchors })
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Nearest anchor (lowest index on ties) and its similarity for every sentence.
/// Anchor sentences are pinned to their own anchor with similarity 1.
pub fn nearest_anchors(embeddings: &EmbeddingMatrix, anchors: &AnchorSet) -> Vec<(usize, f64)> {
    let mut nearest: Vec<(usize, f64)> = (0..embeddings.rows())
        .into_par_iter()
        .map(|s| {
            let row = embeddings.row(s);
            let mut best = (0, f64::NEG_INFINITY);
            for (i, a) in anchors.anchors.iter().enumerate() {
                let sim = cosine(row, embeddings.row(a.embedding_row));
                if sim > best.1 {
                    best = (i, sim);
                }
            }
            best
        })
        .collect();
    for (i, a) in anchors.anchors.iter().enumerate() {
        nearest[a.sentence_id] = (i, 1.0);
    }
    nearest
}

fn assign_nearest(nearest: &[(usize, f64)], threshold: f64) -> Vec<i64> {
    nearest
        .iter()
        .map(|&(anchor, sim)| if sim >= threshold { anchor as i64 } else { OUTLIER })
        .collect()
}

/// Topic id per sentence: the index of the most similar anchor when that
/// similarity is at least `threshold`, otherwise `-1`.
pub fn assign(embeddings: &EmbeddingMatrix, anchors: &AnchorSet, threshold: f64) -> Result<Vec<i64>> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    Ok(assign_nearest(&nearest_anchors(embeddings, anchors), threshold))
}

fn run_from_assignments(
    corpus: &Corpus,
    anchors: &AnchorSet,
    threshold: f64,
    assignments: Vec<i64>,
    tokenizer: &TokenizerConfig,
) -> Result<RunRecord> {
    let topics = ctfidf(&assignments, corpus, tokenizer, TOPIC_NGRAMS)?;
    let mut params = RunParams {
        threshold: Some(threshold),
        ..RunParams::default()
    };
    params.extra.insert("anchors".into(), anchors.len().into());
    Ok(RunRecord {
        run_id: format!("{}-anchor-t{}", corpus.corpus_id, threshold),
        corpus_id: corpus.corpus_id.clone(),
        source: Source::Anchor,
        params,
        assignments,
        topics,
    })
}

/// One anchor-model run at `threshold`, topics represented by c-TF-IDF.
pub fn build_run(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    anchors: &AnchorSet,
    threshold: f64,
    tokenizer: &TokenizerConfig,
) -> Result<RunRecord> {
    embeddings.check_corpus(corpus)?;
    let assignments = assign(embeddings, anchors, threshold)?;
    run_from_assignments(corpus, anchors, threshold, assignments, tokenizer)
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub threshold: f64,
    pub run: RunRecord,
    pub report: MetricReport,
}

/// Builds and scores one run per threshold of `config`, in ascending order.
///
/// Reports shrink `top_k` and `ngrams_per_topic` to what each run offers, so
/// a sweep with fewer anchors than `top_k` still yields comparable rows.
pub fn sweep(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    anchors: &AnchorSet,
    config: &AnchorConfig,
    tokenizer: &TokenizerConfig,
    report_config: &ReportConfig,
) -> Result<Vec<SweepEntry>> {
    embeddings.check_corpus(corpus)?;
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    let thresholds = config.thresholds()?;
    let table = extract_ngrams(corpus, tokenizer);
    let nearest = nearest_anchors(embeddings, anchors);
    let report_config = ReportConfig {
        clamp_selection: true,
        ..report_config.clone()
    };
    thresholds
        .par_iter()
        .map(|&threshold| {
            let run = run_from_assignments(corpus, anchors, threshold, assign_nearest(&nearest, threshold), tokenizer)?;
            let report = metric_report(&run, corpus, &table, &report_config)?;
            Ok(SweepEntry { threshold, run, report })
        })
        .collect()
}

/// Writes `runs/<run_id>.json` per entry and `metrics.csv` keyed by threshold.
pub fn write_sweep(dir: impl AsRef<Path>, entries: &[SweepEntry]) -> Result<()> {
    let dir = dir.as_ref();
    let runs = dir.join("runs");
    std::fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    for e in entries {
        save_run(&e.run, runs.join(format!("{}.json", e.run.run_id)))?;
    }
    let path = dir.join("metrics.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_csv_with_prefix(
        std::io::BufWriter::new(file),
        Some("threshold"),
        entries.iter().map(|e| (Some(e.threshold.to_string()), &e.report)),
    )
}
