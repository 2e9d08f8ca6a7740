//! Per-run metric vector.
//!
//! All metrics except coverage look at a *selection*: the `top_k` largest
//! topics and the first `ngrams_per_topic` scored n-grams of each, so that
//! `T = top_k * ngrams_per_topic` n-grams are scored.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{validate_run, Corpus, RunRecord, ScoredNgram};
use crate::textproc::{normalize_ngram_with, tokenize, NgramTable, Normalization, TokenizerConfig};

pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_NGRAMS_PER_TOPIC: usize = 10;
const NPMI_EPSILON: f64 = 1e-12;

/// `1 - sum(p_i^2)` over topic proportions (the Gini-Simpson form).
/// Outliers are not a topic and must not be passed in.
pub fn gini_score(topic_sizes: &[usize]) -> Result<f64> {
    let total: usize = topic_sizes.iter().sum();
    if topic_sizes.is_empty() || total == 0 {
        return Err(Error::UndefinedMetric("gini of an empty topic list".into()));
    }
    let total = total as f64;
    let concentration: f64 = topic_sizes
        .iter()
        .map(|&s| {
            let p = s as f64 / total;
            p * p
        })
        .sum();
    Ok(1.0 - concentration)
}

/// Lorenz-curve Gini coefficient, `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`.
/// 0 is perfect equality; a single nonzero among `n` gives `(n-1)/n`.
pub fn gini_lorenz(topic_sizes: &[usize]) -> Result<f64> {
    let n = topic_sizes.len();
    let total: usize = topic_sizes.iter().sum();
    if n == 0 || total == 0 {
        return Err(Error::UndefinedMetric("gini of an empty topic list".into()));
    }
    // Sorted form of the pairwise sum: sum_i (2i - n + 1) x_(i).
    let mut sorted = topic_sizes.to_vec();
    sorted.sort_unstable();
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * i as f64 - n as f64 + 1.0) * x as f64)
        .sum();
    Ok(weighted / (n as f64 * total as f64))
}

/// The scored n-grams of the `top_k` largest topics, `ngrams_per_topic` each.
fn select(run: &RunRecord, top_k: usize, ngrams_per_topic: usize) -> Result<Vec<&[ScoredNgram]>> {
    if top_k == 0 || ngrams_per_topic == 0 {
        return Err(Error::Config("top_k and ngrams_per_topic must be positive".into()));
    }
    if run.topics.len() < top_k {
        return Err(Error::InsufficientTopics {
            needed: top_k,
            found: run.topics.len(),
        });
    }
    run.topics[..top_k]
        .iter()
        .map(|t| {
            if t.ngrams.len() < ngrams_per_topic {
                Err(Error::InsufficientNgrams {
                    topic_id: t.topic_id,
                    needed: ngrams_per_topic,
                    found: t.ngrams.len(),
                })
            } else {
                Ok(&t.ngrams[..ngrams_per_topic])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NfsMode {
    /// Mean score over the `T` selected n-grams.
    #[default]
    Mean,
    /// Sum of selected scores divided by the corpus-wide n-gram instance count.
    CorpusNormalized,
}

/// Ngram Frequency Score: mean c-TF-IDF score of the selected n-grams.
pub fn nfs(run: &RunRecord, top_k: usize, ngrams_per_topic: usize) -> Result<f64> {
    let selection = select(run, top_k, ngrams_per_topic)?;
    let total: f64 = selection.iter().flat_map(|t| t.iter()).map(|n| n.score).sum();
    Ok(total / (top_k * ngrams_per_topic) as f64)
}

/// NFS variant dividing the selected score mass by the n-gram instance count of `table`.
pub fn nfs_corpus_normalized(
    run: &RunRecord,
    table: &NgramTable,
    top_k: usize,
    ngrams_per_topic: usize,
) -> Result<f64> {
    let selection = select(run, top_k, ngrams_per_topic)?;
    if table.total_ngram_instances == 0 {
        return Err(Error::UndefinedMetric("n-gram table is empty".into()));
    }
    let total: f64 = selection.iter().flat_map(|t| t.iter()).map(|n| n.score).sum();
    Ok(total / table.total_ngram_instances as f64)
}

/// Non-Unique Value `N / T`: the fraction of selected n-gram instances whose
/// normalized form occurs at least twice among the selection.
pub fn nuv(run: &RunRecord, top_k: usize, ngrams_per_topic: usize) -> Result<f64> {
    nuv_with(run, top_k, ngrams_per_topic, Normalization::Stem)
}

pub fn nuv_with(
    run: &RunRecord,
    top_k: usize,
    ngrams_per_topic: usize,
    normalization: Normalization,
) -> Result<f64> {
    let selection = select(run, top_k, ngrams_per_topic)?;
    let normalized: Vec<String> = selection
        .iter()
        .flat_map(|t| t.iter())
        .map(|n| normalize_ngram_with(&n.ngram, normalization))
        .collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for n in &normalized {
        *counts.entry(n).or_default() += 1;
    }
    let duplicated = normalized.iter().filter(|n| counts[n.as_str()] >= 2).count();
    Ok(duplicated as f64 / normalized.len() as f64)
}

/// Pairwise Uniqueness Value: one minus the mean, over unordered topic pairs,
/// of the shared normalized n-gram count divided by `ngrams_per_topic`.
/// 1.0 means fully distinct topics. A single topic scores 1.0.
pub fn puv(run: &RunRecord, top_k: usize, ngrams_per_topic: usize) -> Result<f64> {
    puv_with(run, top_k, ngrams_per_topic, Normalization::Stem)
}

pub fn puv_with(
    run: &RunRecord,
    top_k: usize,
    ngrams_per_topic: usize,
    normalization: Normalization,
) -> Result<f64> {
    let selection = select(run, top_k, ngrams_per_topic)?;
    let sets: Vec<HashSet<String>> = selection
        .iter()
        .map(|t| t.iter().map(|n| normalize_ngram_with(&n.ngram, normalization)).collect())
        .collect();
    let mut overlap = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            overlap += sets[i].intersection(&sets[j]).count() as f64 / ngrams_per_topic as f64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - overlap / pairs as f64)
}

fn npmi(p_i: f64, p_j: f64, p_ij: f64) -> f64 {
    if p_ij >= 1.0 {
        // Both words occur in every sentence.
        return 1.0;
    }
    let joint = p_ij + NPMI_EPSILON;
    let value = (joint / (p_i * p_j)).ln() / -joint.ln();
    value.clamp(-1.0, 1.0)
}

/// NPMI topic coherence with sentence-level co-occurrence.
///
/// Coherence words of a topic are the distinct unigram tokens of its n-grams,
/// in n-gram order, capped at `words_per_topic`. Each topic scores the mean
/// NPMI over its word pairs; the result is the mean over topics. Pairs with a
/// word absent from the corpus are skipped, as are topics with fewer than two
/// words or no scorable pair.
pub fn npmi_coherence(
    run: &RunRecord,
    corpus: &Corpus,
    config: &TokenizerConfig,
    top_k: usize,
    words_per_topic: usize,
) -> Result<f64> {
    if run.topics.len() < top_k {
        return Err(Error::InsufficientTopics {
            needed: top_k,
            found: run.topics.len(),
        });
    }

    let mut topic_words: Vec<Vec<&str>> = Vec::with_capacity(top_k);
    for topic in &run.topics[..top_k] {
        let mut words: Vec<&str> = Vec::new();
        for w in topic.ngrams.iter().flat_map(|n| n.ngram.split_whitespace()) {
            if words.len() == words_per_topic {
                break;
            }
            if !words.contains(&w) {
                words.push(w);
            }
        }
        topic_words.push(words);
    }

    let wanted: HashSet<&str> = topic_words.iter().flatten().copied().collect();
    let mut occurrences: HashMap<&str, Vec<u32>> = HashMap::new();
    for (sid, text) in corpus.texts().enumerate() {
        let tokens: HashSet<String> = tokenize(text, config).into_iter().collect();
        for w in &wanted {
            if tokens.contains(*w) {
                occurrences.entry(w).or_default().push(sid as u32);
            }
        }
    }

    let n = corpus.len() as f64;
    let mut topic_scores = Vec::new();
    for (topic, words) in run.topics.iter().zip(&topic_words) {
        if words.len() < 2 {
            log::warn!("topic {}: fewer than two coherence words, skipped", topic.topic_id);
            continue;
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                let (Some(a), Some(b)) = (occurrences.get(words[i]), occurrences.get(words[j])) else {
                    continue;
                };
                let joint = sorted_intersection_len(a, b) as f64;
                total += npmi(a.len() as f64 / n, b.len() as f64 / n, joint / n);
                pairs += 1;
            }
        }
        if pairs == 0 {
            log::warn!("topic {}: no coherence word pair occurs in the corpus", topic.topic_id);
            continue;
        }
        topic_scores.push(total / pairs as f64);
    }
    if topic_scores.is_empty() {
        return Err(Error::UndefinedMetric("no topic has a scorable word pair".into()));
    }
    Ok(topic_scores.iter().sum::<f64>() / topic_scores.len() as f64)
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub coverage_pct: f64,
    pub error_size: usize,
    pub topic_20_size: usize,
}

/// Outlier count, share of sentences assigned to a topic, and the size of the
/// 20th largest topic (0 when there are fewer than 20).
pub fn coverage_stats(run: &RunRecord) -> Coverage {
    let total = run.assignments.len();
    let error_size = run.error_size();
    let coverage_pct = if total == 0 {
        0.0
    } else {
        100.0 * (total - error_size) as f64 / total as f64
    };
    Coverage {
        coverage_pct,
        error_size,
        topic_20_size: run.topics.get(19).map_or(0, |t| t.size),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run_id: String,
    pub top_k: usize,
    pub ngrams_per_topic: usize,
    pub gini: f64,
    pub gini_lorenz: f64,
    pub nfs: f64,
    pub nuv: f64,
    pub puv: f64,
    pub coherence_npmi: f64,
    pub coverage_pct: f64,
    pub error_size: usize,
    pub topic_20_size: usize,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "run_id",
    "top_k",
    "ngrams_per_topic",
    "gini",
    "gini_lorenz",
    "nfs",
    "nuv",
    "puv",
    "coherence_npmi",
    "coverage_pct",
    "error_size",
    "topic_20_size",
];

impl MetricReport {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.top_k.to_string(),
            self.ngrams_per_topic.to_string(),
            self.gini.to_string(),
            self.gini_lorenz.to_string(),
            self.nfs.to_string(),
            self.nuv.to_string(),
            self.puv.to_string(),
            self.coherence_npmi.to_string(),
            self.coverage_pct.to_string(),
            self.error_size.to_string(),
            self.topic_20_size.to_string(),
        ]
    }

    /// Numeric value of a named column, for cross-run statistics.
    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "top_k" => self.top_k as f64,
            "ngrams_per_topic" => self.ngrams_per_topic as f64,
            "gini" => self.gini,
            "gini_lorenz" => self.gini_lorenz,
            "nfs" => self.nfs,
            "nuv" => self.nuv,
            "puv" => self.puv,
            "coherence_npmi" => self.coherence_npmi,
            "coverage_pct" => self.coverage_pct,
            "error_size" => self.error_size as f64,
            "topic_20_size" => self.topic_20_size as f64,
            _ => return None,
        })
    }
}

/// Writes a header and one row per report.
pub fn write_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    write_csv_with_prefix(out, None, reports.iter().map(|r| (None, r)))
}

pub(crate) fn write_csv_with_prefix<'a, W, I>(out: W, prefix: Option<&str>, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (Option<String>, &'a MetricReport)>,
{
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv>", e.into());
    let mut header: Vec<&str> = prefix.into_iter().collect();
    header.extend(CSV_COLUMNS);
    w.write_record(&header).map_err(io)?;
    for (key, report) in rows {
        let mut rec: Vec<String> = key.into_iter().collect();
        rec.extend(report.csv_record());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub top_k: usize,
    pub ngrams_per_topic: usize,
    pub nfs_mode: NfsMode,
    pub normalization: Normalization,
    /// Shrink `top_k` and `ngrams_per_topic` to what the run offers instead
    /// of failing. The effective values are recorded in the report.
    pub clamp_selection: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            top_k: DEFAULT_TOP_K,
            ngrams_per_topic: DEFAULT_NGRAMS_PER_TOPIC,
            nfs_mode: NfsMode::Mean,
            normalization: Normalization::Stem,
            clamp_selection: false,
        }
    }
}

/// Computes every metric for `run`. Gini values use all topics of the run.
pub fn metric_report(
    run: &RunRecord,
    corpus: &Corpus,
    table: &NgramTable,
    config: &ReportConfig,
) -> Result<MetricReport> {
    if table.corpus_id != corpus.corpus_id {
        return Err(Error::invalid(format!(
            "n-gram table is for corpus {:?}, not {:?}",
            table.corpus_id, corpus.corpus_id
        )));
    }
    validate_run(run, corpus).into_result()?;

    let (top_k, ngrams_per_topic) = if config.clamp_selection {
        let k = config.top_k.min(run.topics.len());
        let per = run.topics[..k]
            .iter()
            .map(|t| t.ngrams.len())
            .min()
            .unwrap_or(0)
            .min(config.ngrams_per_topic);
        (k, per)
    } else {
        (config.top_k, config.ngrams_per_topic)
    };

    let sizes = run.topic_sizes();
    let nfs = match config.nfs_mode {
        NfsMode::Mean => nfs(run, top_k, ngrams_per_topic)?,
        NfsMode::CorpusNormalized => nfs_corpus_normalized(run, table, top_k, ngrams_per_topic)?,
    };
    let coverage = coverage_stats(run);
    Ok(MetricReport {
        run_id: run.run_id.clone(),
        top_k,
        ngrams_per_topic,
        gini: gini_score(&sizes)?,
        gini_lorenz: gini_lorenz(&sizes)?,
        nfs,
        nuv: nuv_with(run, top_k, ngrams_per_topic, config.normalization)?,
        puv: puv_with(run, top_k, ngrams_per_topic, config.normalization)?,
        coherence_npmi: npmi_coherence(run, corpus, &table.config, top_k, ngrams_per_topic)?,
        coverage_pct: coverage.coverage_pct,
        error_size: coverage.error_size,
        topic_20_size: coverage.topic_20_size,
    })
}
