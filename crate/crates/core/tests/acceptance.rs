//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::path::Path;
use std::time::Instant;

use itertools::Itertools;
use rand::Rng;
use topicscope::anchor::{select_anchors, sweep, write_sweep, AnchorConfig};
use topicscope::interchange::ScoredNgram;
use topicscope::metrics::{gini_score, npmi_coherence, nuv, ReportConfig};
use topicscope::rundb::{Filter, Param, ParamRange, Runstore};
use topicscope::stability::{edit_distance, wer};
use topicscope::stats::{average_ranks, spearman, unique_counts};
use topicscope::textproc::{extract_ngrams, TokenizerConfig};
use topicscope::{Corpus, Source};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    let detail = detail.into();
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gini_exactness() -> Outcome {
    let cases: [(Vec<usize>, f64); 3] = [(vec![100], 0.0), (vec![7; 20], 0.95), (vec![50, 30, 20], 0.62)];
    let mut notes = Vec::new();
    for (sizes, expected) in cases {
        let g = gini_score(&sizes).map_err(|e| e.to_string())?;
        if (g - expected).abs() > 1e-12 {
            return Err(format!("{sizes:?} -> {g}, expected {expected}"));
        }
        notes.push(format!("{g}"));
    }
    Ok(format!("[100], 20 equal, [50,30,20] -> {}", notes.join(", ")))
}

/// 20 topics of 10 n-grams. The first 156 slots hold 52 words three times
/// each, in three different topics; the rest are unique.
fn nuv_run(changed: usize) -> topicscope::RunRecord {
    let sizes: Vec<usize> = (0..20).map(|i| 40 - i).collect();
    let mut run = common::synthetic_run("nuv", "c", Source::Other, &sizes, 0);
    for k in 0..200 {
        let (topic, pos) = (k % 20, k / 20);
        let word = if k < 156 {
            if k % 3 == 0 && k / 3 < changed {
                format!("x{}", k / 3)
            } else {
                format!("w{}", k / 3)
            }
        } else {
            format!("u{k}")
        };
        run.topics[topic].ngrams[pos] = ScoredNgram::new(word, 1.0 - pos as f64 * 0.01);
    }
    run
}

fn nuv_identity() -> Outcome {
    let before = nuv(&nuv_run(0), 20, 10).map_err(|e| e.to_string())?;
    let after = nuv(&nuv_run(8), 20, 10).map_err(|e| e.to_string())?;
    let (n_before, n_after) = (before * 200.0, after * 200.0);
    check(
        before == 156.0 / 200.0 && after == 148.0 / 200.0 && n_before - n_after == 8.0 && (before - after - 0.04).abs() < 1e-15,
        format!("T=200: NUV {before} -> {after} (N {n_before} -> {n_after}), delta {}", before - after),
    )
}

fn unique_count_mechanics() -> Outcome {
    let a: Vec<f64> = (0..342).map(|i| (i % 55) as f64 / 100.0 + 0.001).collect();
    let b: Vec<f64> = (0..92).map(|i| i as f64 * 0.37).collect();
    let (ca, cb) = (unique_counts(&a, 2), unique_counts(&b, 2));
    check(
        (ca.total, ca.unique, ca.pct) == (342, 55, 16.0) && (cb.total, cb.unique, cb.pct) == (92, 92, 100.0),
        format!("({}, {}, {}%) and ({}, {}, {}%)", ca.total, ca.unique, ca.pct, cb.total, cb.unique, cb.pct),
    )
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn spearman_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(2024);
    let mut checked = 0;
    let mut worst_rho: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for n in 3..=8 {
        for trial in 0..20 {
            // later trials draw from a narrow range to force ties
            let spread = if trial < 10 { 1000 } else { 3 };
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..spread) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..spread) as f64).collect();
            let Ok(c) = spearman(&x, &y) else {
                continue;
            };
            let (rx, ry) = (average_ranks(&x), average_ranks(&y));
            let rho = pearson(&rx, &ry);
            let (mut hits, mut total) = (0usize, 0usize);
            for perm in ry.iter().copied().permutations(n) {
                total += 1;
                if pearson(&rx, &perm).abs() >= rho.abs() - 1e-9 {
                    hits += 1;
                }
            }
            let p = hits as f64 / total as f64;
            worst_rho = worst_rho.max((c.rho - rho).abs());
            worst_p = worst_p.max((c.p_value - p).abs());
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst_rho <= 1e-9 && worst_p <= 1e-12 && elapsed < 10.0 && checked >= 100,
        format!("{checked} samples n=3..8, max |drho| {worst_rho:.1e}, max |dp| {worst_p:.1e}, {elapsed:.2}s"),
    )
}

fn npmi_anchors() -> Outcome {
    let config = TokenizerConfig::default();
    let pair = common::run_with_ngrams(&[vec!["aa", "bb"]]);
    let always = Corpus::from_texts("a", ["aa bb", "aa bb cc", "bb aa"]).unwrap();
    let independent = Corpus::from_texts("i", ["aa bb", "aa cc", "dd bb", "dd cc"]).unwrap();
    let one = npmi_coherence(&pair, &always, &config, 1, 10).map_err(|e| e.to_string())?;
    let zero = npmi_coherence(&pair, &independent, &config, 1, 10).map_err(|e| e.to_string())?;

    let six = [
        "apple banana cherry",
        "apple banana",
        "banana cherry date",
        "cherry date",
        "apple date",
        "elder fig",
    ];
    let corpus = Corpus::from_texts("six", six).unwrap();
    let topics = vec![vec!["apple", "banana", "cherry"], vec!["date", "elder", "fig"]];
    let got = npmi_coherence(&common::run_with_ngrams(&topics), &corpus, &config, 2, 10).map_err(|e| e.to_string())?;
    let sets: Vec<HashSet<&str>> = six.iter().map(|t| t.split(' ').collect()).collect();
    let p = |ws: &[&str]| sets.iter().filter(|s| ws.iter().all(|w| s.contains(w))).count() as f64 / 6.0;
    let eps = 1e-12;
    let mut topic_means = Vec::new();
    for words in &topics {
        let pairs: Vec<f64> = words
            .iter()
            .tuple_combinations()
            .map(|(a, b)| {
                let pij = p(&[a, b]) + eps;
                ((pij / (p(&[a]) * p(&[b]))).ln() / -pij.ln()).clamp(-1.0, 1.0)
            })
            .collect();
        topic_means.push(pairs.iter().sum::<f64>() / pairs.len() as f64);
    }
    let expected = topic_means.iter().sum::<f64>() / topic_means.len() as f64;
    check(
        one == 1.0 && zero.abs() <= 1e-6 && (got - expected).abs() <= 1e-9,
        format!("always {one}, independent {zero:.1e}, six-sentence {got:.12} vs {expected:.12}"),
    )
}

struct Sweep {
    corpus: Corpus,
    entries: Vec<topicscope::anchor::SweepEntry>,
    seconds: f64,
}

fn full_sweep() -> Result<Sweep, String> {
    let corpus = common::synthetic_corpus("accept", 500, 25, 42);
    let embeddings = common::random_embeddings("accept", 500, 32, 42);
    let start = Instant::now();
    let tokenizer = TokenizerConfig::default();
    let config = AnchorConfig::default();
    let table = extract_ngrams(&corpus, &tokenizer);
    let anchors = select_anchors(&corpus, &table, &embeddings, &config).map_err(|e| e.to_string())?;
    let entries = sweep(&corpus, &embeddings, &anchors, &config, &tokenizer, &ReportConfig::default()).map_err(|e| e.to_string())?;
    Ok(Sweep {
        corpus,
        entries,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn sweep_monotonicity(s: &Sweep) -> Outcome {
    let e = &s.entries;
    if e.len() != 71 {
        return Err(format!("{} thresholds, expected 71", e.len()));
    }
    let sizes: Vec<usize> = e.iter().map(|x| x.run.error_size()).collect();
    let monotone = sizes.windows(2).all(|w| w[0] <= w[1]);
    let mut unstable = 0usize;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let (lo, hi) = (&e[i].run.assignments, &e[j].run.assignments);
            unstable += lo.iter().zip(hi).filter(|(a, b)| **b >= 0 && a != b).count();
        }
    }
    check(
        monotone && unstable == 0 && s.seconds < 30.0,
        format!(
            "{} sentences, 71 thresholds, error_size {} -> {}, {unstable} unstable assignments, {:.2}s",
            s.corpus.len(),
            sizes[0],
            sizes[70],
            s.seconds
        ),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism(first: &Sweep) -> Outcome {
    let second = full_sweep()?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write_sweep(&a, &first.entries).map_err(|e| e.to_string())?;
    write_sweep(&b, &second.entries).map_err(|e| e.to_string())?;
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    check(
        fa.len() == 72 && fa == fb,
        format!("{} files (71 runs + metrics.csv) byte-identical across two sweeps", fa.len()),
    )
}

fn wer_properties() -> Outcome {
    let mut rng = common::rng(7);
    let vocab = ["the", "cat", "dog", "sat", "mat", "rain", "sun"];
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<&str> {
        (0..rng.gen_range(1..9)).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect()
    };
    let mut failures = 0;
    for _ in 0..1000 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let (ab, ba, bc, ac) = (edit_distance(&a, &b), edit_distance(&b, &a), edit_distance(&b, &c), edit_distance(&a, &c));
        if wer(&a, &a).ok() != Some(0.0) || ab != ba || ac > ab + bc {
            failures += 1;
        }
        let disjoint: Vec<String> = a.iter().map(|w| format!("{w}_x")).collect();
        let a_owned: Vec<String> = a.iter().map(|w| w.to_string()).collect();
        if wer(&disjoint, &a_owned).ok() != Some(1.0) {
            failures += 1;
        }
    }
    check(failures == 0, format!("1000 random triples, {failures} violations"))
}

fn store_durability() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let err = |e: topicscope::Error| e.to_string();

    // truncation fault injection
    let root = tmp.path().join("crash");
    let population = common::stored_population(12, 99);
    let mut store = Runstore::open(&root).map_err(err)?;
    for (run, report) in &population {
        store.append_run(run, report).map_err(err)?;
    }
    let last = store.entries()[11].clone();
    drop(store);
    let log = root.join("runs.log");
    OpenOptions::new()
        .write(true)
        .open(&log)
        .and_then(|f| f.set_len(last.offset + last.len - 7))
        .map_err(|e| e.to_string())?;
    let mut store = Runstore::open(&root).map_err(err)?;
    let mut recovered = 0;
    for (run, report) in &population[..11] {
        if let Some(rec) = store.get(&run.run_id).map_err(err)? {
            if rec.run == *run && rec.report == *report {
                recovered += 1;
            }
        }
    }
    let quarantined = store.quarantined().len();
    store.append_run(&population[11].0, &population[11].1).map_err(err)?;
    let after = Runstore::open_readonly(&root).map_err(err)?.len();

    // query against a linear scan of what was appended
    let root = tmp.path().join("query");
    let population = common::stored_population(200, 100);
    let mut store = Runstore::open(&root).map_err(err)?;
    for (run, report) in &population {
        store.append_run(run, report).map_err(err)?;
    }
    let mut mismatches = 0;
    for (lo, hi) in [(10.0, 20.0), (5.0, 9.0), (25.0, 40.0)] {
        for source in [None, Some(Source::Lda), Some(Source::Anchor)] {
            let filter = Filter {
                corpus_id: None,
                source,
                params: vec![ParamRange {
                    param: Param::MinClusterSize,
                    lo,
                    hi,
                }],
            };
            let scan: Vec<_> = population
                .iter()
                .filter(|(r, _)| {
                    let v = r.params.min_cluster_size.unwrap() as f64;
                    source.is_none_or(|s| r.source == s) && lo <= v && v <= hi
                })
                .map(|(_, rep)| rep.clone())
                .collect();
            if store.query(&filter) != scan {
                mismatches += 1;
            }
        }
    }
    let all = store.query(&Filter::default()).len();
    check(
        recovered == 11 && quarantined == 1 && after == 12 && mismatches == 0 && all == 200,
        format!(
            "truncation: {recovered}/11 recovered, {quarantined} quarantined, {after} after re-append; query vs scan: {mismatches} mismatches over 9 filters, {all} runs"
        ),
    )
}

fn main() {
    let sweep = full_sweep();
    let sweep_outcome = |f: fn(&Sweep) -> Outcome| match &sweep {
        Ok(s) => f(s),
        Err(e) => Err(format!("sweep failed: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("gini formula exactness", gini_exactness()),
        ("nuv arithmetic identity", nuv_identity()),
        ("unique-value counts", unique_count_mechanics()),
        ("spearman oracle", spearman_oracle()),
        ("npmi bounds and brute force", npmi_anchors()),
        ("anchor sweep monotonicity", sweep_outcome(sweep_monotonicity)),
        ("sweep determinism", sweep_outcome(determinism)),
        ("wer properties", wer_properties()),
        ("run store durability", store_durability()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
