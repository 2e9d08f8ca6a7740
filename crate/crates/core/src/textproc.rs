//! Deterministic text processing: tokenization, n-gram counting, n-gram
//! normalization and class-based TF-IDF.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{Corpus, ScoredNgram, TopicRecord, OUTLIER};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Inclusive n-gram lengths, `1 <= lo <= hi <= 3`.
    pub ngram_range: (usize, usize),
    pub min_count: usize,
    pub stopwords: BTreeSet<String>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            ngram_range: (1, 2),
            min_count: 2,
            stopwords: BTreeSet::new(),
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if !(1 <= lo && lo <= hi && hi <= 3) {
            return Err(Error::Config(format!("invalid ngram_range ({lo}, {hi})")));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Splits `text` into runs of alphanumeric characters of length two or more,
/// lowercasing first when configured and dropping stopwords.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let lowered;
    let text = if config.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().nth(1).is_some())
        .filter(|tok| !config.stopwords.contains(*tok))
        .map(str::to_owned)
        .collect()
}

/// All space-joined n-grams of `tokens` with length in `lo..=hi`, shortest first.
pub fn ngrams(tokens: &[String], (lo, hi): (usize, usize)) -> impl Iterator<Item = String> + '_ {
    (lo..=hi).flat_map(move |n| tokens.windows(n).map(|w| w.join(" ")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramCount {
    pub count: usize,
    pub doc_count: usize,
}

/// Corpus-wide n-gram frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramTable {
    pub corpus_id: String,
    pub config: TokenizerConfig,
    pub entries: BTreeMap<String, NgramCount>,
    pub total_ngram_instances: usize,
}

impl NgramTable {
    pub fn get(&self, ngram: &str) -> Option<NgramCount> {
        self.entries.get(ngram).copied()
    }

    /// Entries ordered by count descending, ties by the n-gram string.
    pub fn ranked(&self) -> Vec<(&str, NgramCount)> {
        let mut out: Vec<_> = self.entries.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(a.0.cmp(b.0)));
        out
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::interchange::to_pretty_json(self)
    }
}

/// Counts every n-gram within `config.ngram_range`, never crossing sentence
/// boundaries, and keeps those seen at least `min_count` times.
pub fn extract_ngrams(corpus: &Corpus, config: &TokenizerConfig) -> NgramTable {
    let mut counts: HashMap<String, NgramCount> = HashMap::new();
    for text in corpus.texts() {
        let tokens = tokenize(text, config);
        let mut in_sentence: BTreeSet<String> = BTreeSet::new();
        for gram in ngrams(&tokens, config.ngram_range) {
            counts.entry(gram.clone()).or_insert(NgramCount { count: 0, doc_count: 0 }).count += 1;
            in_sentence.insert(gram);
        }
        for gram in in_sentence {
            counts.get_mut(&gram).expect("counted above").doc_count += 1;
        }
    }
    let entries: BTreeMap<String, NgramCount> = counts
        .into_iter()
        .filter(|(_, c)| c.count >= config.min_count)
        .collect();
    let total_ngram_instances = entries.values().map(|c| c.count).sum();
    NgramTable {
        corpus_id: corpus.corpus_id.clone(),
        config: config.clone(),
        entries,
        total_ngram_instances,
    }
}

/// How n-grams are normalized before duplicate detection.
#[derive(Debug, Clone, Copy, Default)]
pub enum Normalization {
    /// Lowercase and Snowball (Porter2) English stemming per token.
    #[default]
    Stem,
    /// Lowercase only.
    Identity,
    Custom(fn(&str) -> String),
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn normalize_ngram_with(ngram: &str, normalization: Normalization) -> String {
    match normalization {
        Normalization::Stem => ngram
            .split_whitespace()
            .map(|tok| stemmer().stem(&tok.to_lowercase()).into_owned())
            .collect::<Vec<_>>()
            .join(" "),
        Normalization::Identity => ngram
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join(" "),
        Normalization::Custom(f) => f(ngram),
    }
}

/// Lowercases and stems each token: `"running dogs"` becomes `"run dog"`.
pub fn normalize_ngram(ngram: &str) -> String {
    normalize_ngram_with(ngram, Normalization::Stem)
}

/// Class-based TF-IDF topic representations.
///
/// Each topic's sentences are treated as one document. The score of term `t`
/// in topic `c` is `tf(t,c) * ln(1 + A / tf(t))`, where `tf(t)` is the count of
/// `t` over the whole corpus and `A` is the mean number of tokens per topic.
/// Terms are the n-grams of `config.ngram_range` whose corpus count reaches
/// `config.min_count`. Outlier sentences contribute to `tf(t)` only.
///
/// Returns one record per topic id found in `assignments`, in canonical order
/// (size descending, id ascending), each carrying up to `top_n` terms.
pub fn ctfidf(
    assignments: &[i64],
    corpus: &Corpus,
    config: &TokenizerConfig,
    top_n: usize,
) -> Result<Vec<TopicRecord>> {
    config.validate()?;
    if assignments.len() != corpus.len() {
        return Err(Error::invalid(format!(
            "assignment length {} != corpus size {}",
            assignments.len(),
            corpus.len()
        )));
    }

    let mut corpus_tf: HashMap<String, usize> = HashMap::new();
    let mut topic_tf: BTreeMap<i64, HashMap<String, usize>> = BTreeMap::new();
    let mut topic_tokens: BTreeMap<i64, usize> = BTreeMap::new();
    let mut topic_sizes: BTreeMap<i64, usize> = BTreeMap::new();

    for (text, &topic) in corpus.texts().zip(assignments) {
        let tokens = tokenize(text, config);
        if topic != OUTLIER {
            *topic_sizes.entry(topic).or_default() += 1;
            *topic_tokens.entry(topic).or_default() += tokens.len();
        }
        for gram in ngrams(&tokens, config.ngram_range) {
            if topic != OUTLIER {
                *topic_tf.entry(topic).or_default().entry(gram.clone()).or_default() += 1;
            }
            *corpus_tf.entry(gram).or_default() += 1;
        }
    }

    let n_topics = topic_sizes.len();
    let avg_tokens = if n_topics == 0 {
        0.0
    } else {
        topic_tokens.values().sum::<usize>() as f64 / n_topics as f64
    };

    let mut topics = Vec::with_capacity(n_topics);
    for (&topic_id, &size) in &topic_sizes {
        let mut scored: Vec<ScoredNgram> = topic_tf
            .get(&topic_id)
            .into_iter()
            .flatten()
            .filter_map(|(gram, &tf_c)| {
                let tf = corpus_tf[gram];
                (tf >= config.min_count)
                    .then(|| ScoredNgram::new(gram.clone(), tf_c as f64 * (1.0 + avg_tokens / tf as f64).ln()))
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.ngram.cmp(&b.ngram)));
        scored.truncate(top_n);
        if scored.is_empty() {
            log::warn!("topic {topic_id} has no terms after tokenization");
        }
        topics.push(TopicRecord {
            topic_id,
            size,
            ngrams: scored,
        });
    }
    topics.sort_by(|a, b| b.size.cmp(&a.size).then(a.topic_id.cmp(&b.topic_id)));
    Ok(topics)
}
