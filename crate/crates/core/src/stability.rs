//! Fuzzy topic-stability checking.
//!
//! Topic names are built from a topic's top n-grams the way BERTopic labels
//! topics (`word_word_word_word`). A run's top topic names are compared
//! against a lookup of names seen in earlier runs using word error rate; the
//! stability score sums, over the top topics, how many prior names each one
//! is similar to.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{RunRecord, TopicRecord};
use crate::textproc::{normalize_ngram_with, Normalization};

pub const DEFAULT_WER_THRESHOLD: f64 = 0.5;
pub const DEFAULT_NAME_WORDS: usize = 4;
pub const STABILITY_TOP_K: usize = 20;

/// Word-level Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word error rate: edit distance divided by the reference length. May exceed 1.
pub fn wer<T: PartialEq>(hypothesis: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::UndefinedMetric("word error rate against an empty reference".into()));
    }
    Ok(edit_distance(hypothesis, reference) as f64 / reference.len() as f64)
}

/// Underscore-joined normalized forms of the first `words` n-grams.
pub fn topic_name(topic: &TopicRecord, words: usize) -> String {
    topic
        .ngrams
        .iter()
        .take(words.max(1))
        .map(|n| normalize_ngram_with(&n.ngram, Normalization::Stem))
        .collect::<Vec<_>>()
        .join("_")
}

fn name_tokens(name: &str) -> Vec<&str> {
    name.split('_').collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupEntry {
    pub freq: u64,
    pub first_seen_run: String,
}

/// Topic names seen in previous runs. Serialized as a JSON object mapping
/// name to `{"freq", "first_seen_run"}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicNameLookup {
    pub entries: BTreeMap<String, LookupEntry>,
}

impl TopicNameLookup {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let lookup: TopicNameLookup = serde_json::from_slice(&bytes).map_err(|e| Error::from_json(&e))?;
        if let Some((name, _)) = lookup.entries.iter().find(|(_, e)| e.freq == 0) {
            return Err(Error::invalid(format!("lookup entry {name:?} has zero frequency")));
        }
        Ok(lookup)
    }

    /// Loads `path`, or returns an empty lookup if it does not exist.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, crate::interchange::to_pretty_json(self)).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicMatch {
    pub topic_id: i64,
    pub name: String,
    pub match_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub run_id: String,
    pub per_topic_matches: Vec<TopicMatch>,
    pub stability_score: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    pub top_k: usize,
    pub name_words: usize,
    pub wer_threshold: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            top_k: STABILITY_TOP_K,
            name_words: DEFAULT_NAME_WORDS,
            wer_threshold: DEFAULT_WER_THRESHOLD,
        }
    }
}

pub fn stability_score(run: &RunRecord, lookup: &TopicNameLookup, wer_threshold: f64) -> Result<StabilityResult> {
    stability_score_with(
        run,
        lookup,
        &StabilityConfig {
            wer_threshold,
            ..StabilityConfig::default()
        },
    )
}

/// Counts, for each of the top topics, the lookup names within
/// `wer_threshold` of its name. Every qualifying (topic, entry) pair counts.
pub fn stability_score_with(
    run: &RunRecord,
    lookup: &TopicNameLookup,
    config: &StabilityConfig,
) -> Result<StabilityResult> {
    if config.wer_threshold.is_nan() || config.wer_threshold < 0.0 {
        return Err(Error::Config(format!("wer threshold must be >= 0, got {}", config.wer_threshold)));
    }
    if run.topics.len() < config.top_k {
        return Err(Error::InsufficientTopics {
            needed: config.top_k,
            found: run.topics.len(),
        });
    }
    let references: Vec<Vec<&str>> = lookup.entries.keys().map(|k| name_tokens(k)).collect();
    let mut per_topic_matches = Vec::with_capacity(config.top_k);
    for topic in &run.topics[..config.top_k] {
        let name = topic_name(topic, config.name_words);
        let hyp = name_tokens(&name);
        let mut match_count = 0;
        for reference in &references {
            if wer(&hyp, reference)? <= config.wer_threshold {
                match_count += 1;
            }
        }
        per_topic_matches.push(TopicMatch {
            topic_id: topic.topic_id,
            name,
            match_count,
        });
    }
    let stability_score = per_topic_matches.iter().map(|m| m.match_count).sum();
    Ok(StabilityResult {
        run_id: run.run_id.clone(),
        per_topic_matches,
        stability_score,
    })
}

/// Inserts or increments the names of the run's top 20 topics.
pub fn update_lookup(lookup: &mut TopicNameLookup, run: &RunRecord) {
    update_lookup_with(lookup, run, &StabilityConfig::default());
}

pub fn update_lookup_with(lookup: &mut TopicNameLookup, run: &RunRecord, config: &StabilityConfig) {
    for topic in run.topics.iter().take(config.top_k) {
        if topic.ngrams.is_empty() {
            continue;
        }
        lookup
            .entries
            .entry(topic_name(topic, config.name_words))
            .and_modify(|e| e.freq += 1)
            .or_insert_with(|| LookupEntry {
                freq: 1,
                first_seen_run: run.run_id.clone(),
            });
    }
}
