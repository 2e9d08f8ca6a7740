mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use topicscope::anchor::{assign, build_run, cosine, select_anchors, sweep, Anchor, AnchorConfig, AnchorSet};
use topicscope::interchange::validate_run;
use topicscope::metrics::ReportConfig;
use topicscope::textproc::{extract_ngrams, TokenizerConfig};
use topicscope::{Corpus, Error};

fn simple_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Sentences mixing zero to two theme phrases with fillers from a small
/// vocabulary, so some phrases share sentences and fillers compete with theme words.
fn crowded_corpus(seed: u64) -> Corpus {
    let mut rng = common::rng(seed);
    let fillers: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let texts: Vec<String> = (0..50)
        .map(|_| {
            let mut words: Vec<String> = (0..rng.gen_range(2..6))
                .map(|_| fillers.choose(&mut rng).unwrap().clone())
                .collect();
            for _ in 0..rng.gen_range(0..3) {
                let t = rng.gen_range(0..12);
                let at = rng.gen_range(0..=words.len());
                words.insert(at, format!("pa{t} pb{t}"));
            }
            words.join(" ")
        })
        .collect();
    Corpus::from_texts("crowded", texts).unwrap()
}

/// Direct transcription of the anchor rule over every (n-gram, sentence) pair.
fn oracle(corpus: &Corpus, top_ngrams: usize, cutoff: usize) -> Vec<(String, usize)> {
    let sentences: Vec<Vec<String>> = corpus.texts().map(simple_tokens).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in &sentences {
        for n in 1..=2 {
            for w in tokens.windows(n) {
                *counts.entry(w.join(" ")).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= 2).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let pool: Vec<String> = ranked.iter().filter(|(g, _)| g.contains(' ')).take(top_ngrams).map(|(g, _)| g.clone()).collect();
    let high: HashSet<String> = ranked.iter().filter(|(g, _)| !g.contains(' ')).take(cutoff).map(|(g, _)| g.clone()).collect();

    let mut chosen = Vec::new();
    let mut taken = HashSet::new();
    for gram in &pool {
        let own: HashSet<&str> = gram.split(' ').collect();
        for (sid, tokens) in sentences.iter().enumerate() {
            let bigrams: Vec<String> = tokens.windows(2).map(|w| w.join(" ")).collect();
            let occurrences = bigrams.iter().filter(|b| *b == gram).count();
            let others = bigrams.iter().any(|b| b != gram && pool.contains(b));
            let clean = tokens.iter().all(|t| own.contains(t.as_str()) || !high.contains(t));
            if occurrences == 1 && !others && clean && !taken.contains(&sid) {
                taken.insert(sid);
                chosen.push((gram.clone(), sid));
                break;
            }
        }
    }
    chosen
}

#[test]
fn selection_matches_exhaustive_oracle() {
    let tokenizer = TokenizerConfig::default();
    let mut compared = 0;
    for seed in 0..8 {
        let corpus = crowded_corpus(seed);
        let embeddings = common::random_embeddings("crowded", corpus.len(), 4, seed);
        let table = extract_ngrams(&corpus, &tokenizer);
        for (top_ngrams, cutoff) in [(20, 50), (5, 10), (20, 3), (8, 0), (12, 25)] {
            let config = AnchorConfig {
                top_ngrams,
                high_value_unigram_cutoff: cutoff,
                ..AnchorConfig::default()
            };
            let expected = oracle(&corpus, top_ngrams, cutoff);
            match select_anchors(&corpus, &table, &embeddings, &config) {
                Ok(set) => {
                    let got: Vec<(String, usize)> = set.anchors.iter().map(|a| (a.ngram.clone(), a.sentence_id)).collect();
                    assert_eq!(got, expected, "seed {seed} config {top_ngrams}/{cutoff}");
                    assert!(set.anchors.iter().all(|a| a.embedding_row == a.sentence_id));
                    compared += 1;
                }
                Err(Error::EmptyAnchors) => assert!(expected.is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(compared > 20);
}

#[test]
fn assignment_matches_brute_force_cosine_table() {
    let embeddings = common::random_embeddings("m", 20, 4, 17);
    let rows = [2usize, 7, 13];
    let anchors = AnchorSet {
        anchors: rows
            .iter()
            .map(|&r| Anchor {
                ngram: format!("g{r}"),
                sentence_id: r,
                embedding_row: r,
            })
            .collect(),
    };
    let table: Vec<Vec<f64>> = (0..20)
        .map(|s| {
            rows.iter()
                .map(|&a| {
                    let (x, y) = (embeddings.row(s), embeddings.row(a));
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| f64::from(*p) * f64::from(*q)).sum();
                    let nx: f64 = x.iter().map(|p| f64::from(*p).powi(2)).sum::<f64>().sqrt();
                    let ny: f64 = y.iter().map(|q| f64::from(*q).powi(2)).sum::<f64>().sqrt();
                    dot / (nx * ny)
                })
                .collect()
        })
        .collect();
    for threshold in [-1.0, 0.0, 0.25, 0.5, 0.9, 1.0] {
        let got = assign(&embeddings, &anchors, threshold).unwrap();
        for s in 0..20 {
            let expected = if let Some(i) = rows.iter().position(|&r| r == s) {
                i as i64
            } else {
                let (best, sim) = table[s]
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                if sim >= threshold {
                    best as i64
                } else {
                    -1
                }
            };
            assert_eq!(got[s], expected, "sentence {s} at {threshold}");
        }
    }
}

fn setup(sentences: usize, seed: u64) -> (Corpus, topicscope::EmbeddingMatrix, AnchorSet) {
    let corpus = common::synthetic_corpus("syn", sentences, 25, seed);
    let embeddings = common::random_embeddings("syn", corpus.len(), 32, seed);
    let table = extract_ngrams(&corpus, &TokenizerConfig::default());
    let anchors = select_anchors(&corpus, &table, &embeddings, &AnchorConfig::default()).unwrap();
    (corpus, embeddings, anchors)
}

#[test]
fn synthetic_corpus_yields_twenty_anchors() {
    let (_, _, anchors) = setup(500, 1);
    assert_eq!(anchors.len(), 20);
}

#[test]
fn built_runs_are_valid_and_deterministic() {
    let (corpus, embeddings, anchors) = setup(300, 2);
    let tokenizer = TokenizerConfig::default();
    for threshold in [0.3, 0.55, 1.0] {
        let a = build_run(&corpus, &embeddings, &anchors, threshold, &tokenizer).unwrap();
        let b = build_run(&corpus, &embeddings, &anchors, threshold, &tokenizer).unwrap();
        assert_eq!(a, b);
        assert!(validate_run(&a, &corpus).is_empty());
        assert_eq!(a.params.threshold, Some(threshold));
        for (i, anchor) in anchors.anchors.iter().enumerate() {
            assert_eq!(a.assignments[anchor.sentence_id], i as i64);
        }
    }
}

#[test]
fn sweep_edge_cases() {
    let (corpus, embeddings, anchors) = setup(200, 3);
    let tokenizer = TokenizerConfig::default();
    let single = AnchorConfig {
        threshold_lo: 0.42,
        threshold_hi: 0.42,
        ..AnchorConfig::default()
    };
    let entries = sweep(&corpus, &embeddings, &anchors, &single, &tokenizer, &ReportConfig::default()).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].threshold, 0.42);

    let full = sweep(&corpus, &embeddings, &anchors, &AnchorConfig::default(), &tokenizer, &ReportConfig::default()).unwrap();
    assert_eq!(full.len(), 71);
    let first = &full[0].report;
    let last = &full[70].report;
    assert_eq!(full[70].threshold, 1.0);
    assert!(last.coverage_pct <= first.coverage_pct);
    // only the anchors themselves reach similarity 1
    assert_eq!(last.error_size, corpus.len() - anchors.len());

    let empty = AnchorSet::default();
    assert!(matches!(
        sweep(&corpus, &embeddings, &empty, &single, &tokenizer, &ReportConfig::default()),
        Err(Error::EmptyAnchors)
    ));
    let bad = AnchorConfig {
        threshold_lo: 0.8,
        threshold_hi: 0.3,
        ..AnchorConfig::default()
    };
    assert!(matches!(bad.thresholds(), Err(Error::Config(_))));
}

#[test]
fn default_grid_has_71_points() {
    let t = AnchorConfig::default().thresholds().unwrap();
    assert_eq!(t.len(), 71);
    assert_eq!((t[0], t[70]), (0.3, 1.0));
    assert_eq!(t[7], 0.37);
}

proptest! {
    #[test]
    fn cosine_is_bounded(
        a in prop::collection::vec(-1e3f32..1e3, 8),
        b in prop::collection::vec(-1e3f32..1e3, 8),
    ) {
        prop_assume!(a.iter().any(|v| *v != 0.0) && b.iter().any(|v| *v != 0.0));
        let c = cosine(&a, &b);
        prop_assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&c));
        prop_assert!((cosine(&a, &a) - 1.0).abs() < 1e-6);
    }
}
