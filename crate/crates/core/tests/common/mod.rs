#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topicscope::interchange::{RunParams, ScoredNgram};
use topicscope::{Corpus, EmbeddingMatrix, RunRecord, Source, TopicRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sentences built around `themes` recurring two-word phrases, padded with
/// filler words drawn from a vocabulary large enough that no filler word
/// outranks the theme words.
pub fn synthetic_corpus(id: &str, sentences: usize, themes: usize, seed: u64) -> Corpus {
    let mut rng = rng(seed);
    let fillers: Vec<String> = (0..400).map(|i| format!("filler{i}")).collect();
    let texts: Vec<String> = (0..sentences)
        .map(|s| {
            let theme = s % themes;
            let mut words: Vec<String> = (0..rng.gen_range(5..9))
                .map(|_| fillers.choose(&mut rng).unwrap().clone())
                .collect();
            let at = rng.gen_range(0..=words.len());
            words.insert(at, format!("theme{theme}a theme{theme}b"));
            words.join(" ")
        })
        .collect();
    Corpus::from_texts(id, texts).unwrap()
}

pub fn random_embeddings(corpus_id: &str, rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = rng(seed);
    let values = (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(corpus_id, rows, cols, values).unwrap()
}

/// A consistent run over `sizes.len()` topics with `outliers` unassigned
/// sentences; topic `i` gets n-grams `t{i}g{j}` with decreasing scores.
pub fn synthetic_run(id: &str, corpus_id: &str, source: Source, sizes: &[usize], outliers: usize) -> RunRecord {
    let mut assignments = vec![-1i64; outliers];
    let mut topics = Vec::new();
    for (i, &size) in sizes.iter().enumerate() {
        assignments.extend(std::iter::repeat_n(i as i64, size));
        topics.push(TopicRecord {
            topic_id: i as i64,
            size,
            ngrams: (0..10)
                .map(|j| ScoredNgram::new(format!("t{i}g{j}"), 1.0 - j as f64 * 0.05))
                .collect(),
        });
    }
    let mut run = RunRecord {
        run_id: id.into(),
        corpus_id: corpus_id.into(),
        source,
        params: RunParams::default(),
        assignments,
        topics,
    };
    run.canonicalize();
    run
}

/// Run whose topic n-gram lists are given verbatim, one sentence per topic.
pub fn run_with_ngrams(topics: &[Vec<&str>]) -> RunRecord {
    RunRecord {
        run_id: "r".into(),
        corpus_id: "c".into(),
        source: Source::Other,
        params: RunParams::default(),
        assignments: (0..topics.len() as i64).collect(),
        topics: topics
            .iter()
            .enumerate()
            .map(|(i, grams)| TopicRecord {
                topic_id: i as i64,
                size: 1,
                ngrams: grams
                    .iter()
                    .enumerate()
                    .map(|(j, g)| ScoredNgram::new(*g, 1.0 / (j + 1) as f64))
                    .collect(),
            })
            .collect(),
    }
}

/// A synthetic stored population: run `i` gets varied parameters, source and
/// corpus, and a report whose metric values derive from `i`.
pub fn stored_population(n: usize, seed: u64) -> Vec<(RunRecord, topicscope::MetricReport)> {
    let mut rng = rng(seed);
    let sources = [Source::Bertopic, Source::Top2vec, Source::Lda, Source::Anchor];
    (0..n)
        .map(|i| {
            let corpus_id = if i % 3 == 0 { "large" } else { "small" };
            let sizes: Vec<usize> = (0..rng.gen_range(2..6)).map(|_| rng.gen_range(1..9)).collect();
            let mut run = synthetic_run(&format!("run-{i:04}"), corpus_id, sources[i % 4], &sizes, rng.gen_range(0..5));
            run.params.min_cluster_size = Some(rng.gen_range(5..30));
            run.params.n_neighbors = if i % 5 == 0 { None } else { Some(rng.gen_range(2..50)) };
            let report = topicscope::MetricReport {
                run_id: run.run_id.clone(),
                top_k: 2,
                ngrams_per_topic: 10,
                gini: rng.gen_range(0.0..0.95),
                gini_lorenz: rng.gen_range(0.0..0.5),
                nfs: rng.gen_range(0.0..1.0),
                nuv: (rng.gen_range(0..20) as f64) / 100.0,
                puv: rng.gen_range(0.5..1.0),
                coherence_npmi: rng.gen_range(-1.0..1.0),
                coverage_pct: 100.0,
                error_size: run.error_size(),
                topic_20_size: 0,
            };
            (run, report)
        })
        .collect()
}
