//! File formats through which corpora, runs and embeddings enter the system.
//!
//! * Corpus: UTF-8 JSON `{"corpus_id": .., "sentences": [{"id": .., "text": ..}, ..]}`.
//! * Run: UTF-8 JSON mirroring [`RunRecord`].
//! * Embeddings: one JSON header line `{"corpus_id", "rows", "cols", "dtype": "f32le"}`,
//!   a newline, then `rows * cols` little-endian `f32` values in row-major order.
//!
//! Topic `-1` marks outlier sentences. It appears only in assignments and never
//! as a [`TopicRecord`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTLIER: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub corpus_id: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    /// Builds a corpus from texts, numbering sentences from 0.
    pub fn from_texts<I, S>(corpus_id: impl Into<String>, texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let corpus = Corpus {
            corpus_id: corpus_id.into(),
            sentences: texts
                .into_iter()
                .enumerate()
                .map(|(id, text)| Sentence {
                    id,
                    text: text.into(),
                })
                .collect(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }

    /// Sorts sentences by id and checks ids are unique, contiguous from 0 and
    /// that no text is blank.
    fn canonicalize(&mut self) -> Result<()> {
        self.sentences.sort_by_key(|s| s.id);
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.sentences.is_empty() {
            problems.push("corpus has no sentences".to_string());
        }
        let mut seen = HashSet::with_capacity(self.sentences.len());
        for s in &self.sentences {
            if !seen.insert(s.id) {
                problems.push(format!("duplicate sentence_id {}", s.id));
            }
            if s.text.trim().is_empty() {
                problems.push(format!("sentence {} is empty", s.id));
            }
        }
        if seen.len() == self.sentences.len() {
            for (pos, s) in self.sentences.iter().enumerate() {
                if s.id != pos {
                    problems.push(format!(
                        "sentence ids must be contiguous from 0; found {} at position {}",
                        s.id, pos
                    ));
                    break;
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Bertopic,
    Top2vec,
    Lda,
    Anchor,
    Other,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Bertopic => "bertopic",
            Source::Top2vec => "top2vec",
            Source::Lda => "lda",
            Source::Anchor => "anchor",
            Source::Other => "other",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bertopic" => Ok(Source::Bertopic),
            "top2vec" => Ok(Source::Top2vec),
            "lda" => Ok(Source::Lda),
            "anchor" => Ok(Source::Anchor),
            "other" => Ok(Source::Other),
            _ => Err(Error::Config(format!("unknown source {s:?}"))),
        }
    }
}

/// Model parameters recorded with a run. Which fields are present depends on
/// the model that produced it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cluster_size: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_topic_size: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_neighbors: Option<i64>,
    /// Cosine threshold; anchor runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNgram {
    pub ngram: String,
    pub score: f64,
}

impl ScoredNgram {
    pub fn new(ngram: impl Into<String>, score: f64) -> Self {
        ScoredNgram {
            ngram: ngram.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub topic_id: i64,
    pub size: usize,
    pub ngrams: Vec<ScoredNgram>,
}

impl TopicRecord {
    pub fn ngram_strs(&self) -> impl Iterator<Item = &str> {
        self.ngrams.iter().map(|n| n.ngram.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub corpus_id: String,
    pub source: Source,
    #[serde(default)]
    pub params: RunParams,
    pub assignments: Vec<i64>,
    pub topics: Vec<TopicRecord>,
}

impl RunRecord {
    /// Count of sentences assigned to the outlier topic.
    pub fn error_size(&self) -> usize {
        self.assignments.iter().filter(|&&t| t == OUTLIER).count()
    }

    pub fn topic_sizes(&self) -> Vec<usize> {
        self.topics.iter().map(|t| t.size).collect()
    }

    fn is_canonically_sorted(&self) -> bool {
        self.topics
            .windows(2)
            .all(|w| topic_order(&w[0], &w[1]) != std::cmp::Ordering::Greater)
    }

    /// Sorts topics by size descending, ties by ascending topic id. Returns
    /// whether the order changed.
    pub fn canonicalize(&mut self) -> bool {
        if self.is_canonically_sorted() {
            return false;
        }
        self.topics.sort_by(topic_order);
        true
    }
}

fn topic_order(a: &TopicRecord, b: &TopicRecord) -> std::cmp::Ordering {
    b.size.cmp(&a.size).then(a.topic_id.cmp(&b.topic_id))
}

/// A run as read from disk. `resorted` is set when the topic list arrived in
/// non-canonical order and was re-sorted.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub run: RunRecord,
    pub resorted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32Le,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingHeader {
    corpus_id: String,
    rows: usize,
    cols: usize,
    dtype: Dtype,
}

/// Row-per-sentence dense embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub corpus_id: String,
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(corpus_id: impl Into<String>, rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        let m = EmbeddingMatrix {
            corpus_id: corpus_id.into(),
            rows,
            cols,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.cols < 2 {
            problems.push(format!("embedding width must be at least 2, got {}", self.cols));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            problems.push(format!("non-finite value in row {}", i / self.cols.max(1)));
        }
        if self.cols > 0 {
            for r in 0..self.rows {
                if self.row(r).iter().all(|&v| v == 0.0) {
                    problems.push(format!("row {r} is the zero vector"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Checks the matrix pairs with `corpus`.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let mut problems = Vec::new();
        if self.corpus_id != corpus.corpus_id {
            problems.push(format!(
                "embeddings are for corpus {:?}, not {:?}",
                self.corpus_id, corpus.corpus_id
            ));
        }
        if self.rows != corpus.len() {
            problems.push(format!(
                "embedding rows {} != corpus sentences {}",
                self.rows,
                corpus.len()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = EmbeddingHeader {
            corpus_id: self.corpus_id.clone(),
            rows: self.rows,
            cols: self.cols,
            dtype: Dtype::F32Le,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.reserve(self.values.len() * 4);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes.iter().position(|&b| b == b'\n').ok_or(Error::Format {
            line: 1,
            column: 0,
            message: "missing header line".into(),
        })?;
        let header: EmbeddingHeader =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::from_json(&e))?;
        let payload = &bytes[newline + 1..];
        let expected = header
            .rows
            .checked_mul(header.cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format {
                line: 1,
                column: 0,
                message: "declared shape overflows".into(),
            })?;
        if payload.len() != expected {
            return Err(Error::Format {
                line: 2,
                column: payload.len().min(expected) + 1,
                message: format!(
                    "payload has {} bytes, header declares {}x{} f32 values ({expected} bytes)",
                    payload.len(),
                    header.rows,
                    header.cols
                ),
            });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        EmbeddingMatrix::new(header.corpus_id, header.rows, header.cols, values)
    }
}

/// Violated invariants of a run; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub entries: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self.entries))
        }
    }
}

/// Checks a run's internal invariants, and its agreement with `corpus` when given.
pub fn run_violations(run: &RunRecord, corpus: Option<&Corpus>) -> ValidationReport {
    let mut entries = Vec::new();

    if let Some(corpus) = corpus {
        if run.corpus_id != corpus.corpus_id {
            entries.push(format!(
                "run corpus_id {:?} does not match corpus {:?}",
                run.corpus_id, corpus.corpus_id
            ));
        }
        if run.assignments.len() != corpus.len() {
            entries.push(format!(
                "assignment length {} != corpus size {}",
                run.assignments.len(),
                corpus.len()
            ));
        }
    }

    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &t in &run.assignments {
        if t < OUTLIER {
            entries.push(format!("invalid topic id {t} in assignments"));
        } else if t != OUTLIER {
            *counts.entry(t).or_default() += 1;
        }
    }

    let mut seen = HashSet::new();
    for topic in &run.topics {
        let id = topic.topic_id;
        if id < 0 {
            entries.push(format!("topic record with negative id {id}"));
            continue;
        }
        if !seen.insert(id) {
            entries.push(format!("duplicate topic record {id}"));
            continue;
        }
        let assigned = counts.get(&id).copied().unwrap_or(0);
        if topic.size != assigned {
            entries.push(format!(
                "size mismatch topic {id}: record says {}, {} sentences assigned",
                topic.size, assigned
            ));
        }
        if topic.size == 0 {
            entries.push(format!("topic {id} is empty"));
        }
        if topic.ngrams.is_empty() {
            entries.push(format!("topic {id} has no n-grams"));
        }
        let mut names = HashSet::new();
        for n in &topic.ngrams {
            if !names.insert(n.ngram.as_str()) {
                entries.push(format!("topic {id} repeats n-gram {:?}", n.ngram));
            }
            if !n.score.is_finite() || n.score < 0.0 {
                entries.push(format!("topic {id} n-gram {:?} has invalid score {}", n.ngram, n.score));
            }
        }
        if topic.ngrams.windows(2).any(|w| w[1].score > w[0].score) {
            entries.push(format!("topic {id} n-gram scores are not non-increasing"));
        }
    }
    for id in counts.keys() {
        if !seen.contains(id) {
            entries.push(format!("topic {id} is assigned but has no topic record"));
        }
    }
    if !run.is_canonically_sorted() {
        entries.push("topics are not sorted by size".to_string());
    }

    ValidationReport { entries }
}

pub fn validate_run(run: &RunRecord, corpus: &Corpus) -> ValidationReport {
    run_violations(run, Some(corpus))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus> {
    let mut corpus: Corpus = serde_json::from_slice(bytes).map_err(|e| Error::from_json(&e))?;
    corpus.canonicalize()?;
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    parse_corpus(&read(path.as_ref())?)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_pretty_json(corpus))
}

/// Parses a run, canonicalizes topic order and checks internal invariants.
/// Agreement with a corpus is checked separately by [`validate_run`].
pub fn parse_run(bytes: &[u8]) -> Result<LoadedRun> {
    let mut run: RunRecord = serde_json::from_slice(bytes).map_err(|e| Error::from_json(&e))?;
    let resorted = run.canonicalize();
    if resorted {
        log::warn!("run {}: topics were not sorted by size; re-sorted", run.run_id);
    }
    run_violations(&run, None).into_result()?;
    Ok(LoadedRun { run, resorted })
}

pub fn load_run(path: impl AsRef<Path>) -> Result<LoadedRun> {
    parse_run(&read(path.as_ref())?)
}

pub fn run_to_json(run: &RunRecord) -> Vec<u8> {
    to_pretty_json(run)
}

pub fn save_run(run: &RunRecord, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &run_to_json(run))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&read(path.as_ref())?)
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &matrix.to_bytes())
}
