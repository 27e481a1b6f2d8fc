mod common;

use std::collections::{BTreeSet, HashMap};

use common::{all_pairs, labeled, set_jaccard, short_articles, window_set};
use dedupkit::lsh::{LshIndex, LshParams, VerifyMode};
use dedupkit::synth::{build_donor_pool, document_rng, perturb, SynthConfig};
use dedupkit::text::Document;

fn params(k: usize, n: usize, t: f64) -> LshParams {
    LshParams::new(k, n, t, VerifyMode::Exact).unwrap()
}

#[test]
fn candidate_frequency_meets_banding_bound() {
    let corpus = labeled(400, 21);
    assert_eq!(corpus.documents.len(), 500);
    let p = params(64, 12, 0.65);
    let floor = p.candidate_probability(p.threshold) - 0.1;
    let similar: Vec<(String, String, f64)> = all_pairs(&corpus.documents, p.n)
        .into_iter()
        .filter(|(_, _, j)| *j >= p.threshold)
        .collect();
    assert!(similar.len() >= 50, "only {} similar pairs", similar.len());

    let mut hits: HashMap<(String, String), usize> = HashMap::new();
    let seeds = 50;
    for seed in 0..seeds {
        let index = LshIndex::build(p, 1000 + seed, &corpus.documents).unwrap();
        for (a, b, _) in &similar {
            if index.candidates(a).unwrap().contains(b) {
                *hits.entry((a.clone(), b.clone())).or_default() += 1;
            }
        }
    }
    for (a, b, j) in &similar {
        let freq = hits.get(&(a.clone(), b.clone())).copied().unwrap_or(0) as f64 / seeds as f64;
        assert!(
            freq >= floor,
            "{a}/{b} J={j:.3}: frequency {freq} < {floor:.3}"
        );
    }
}

#[test]
fn candidates_are_symmetric() {
    let corpus = labeled(120, 4);
    let index = LshIndex::build(params(128, 12, 0.65), 3, &corpus.documents).unwrap();
    for d in &corpus.documents {
        for c in index.candidates(&d.id).unwrap() {
            assert!(index.candidates(&c).unwrap().contains(&d.id));
        }
    }
}

#[test]
fn scan_on_corpus_without_near_duplicates_is_empty() {
    let docs = short_articles(50, 77);
    let p = params(128, 12, 0.65);
    assert!(all_pairs(&docs, p.n)
        .iter()
        .all(|(_, _, j)| *j < p.threshold));
    let scan = LshIndex::build(p, 1, &docs).unwrap().dedup_scan();
    assert!(scan.pairs.is_empty());
    assert!(scan.clusters.is_empty());
}

#[test]
fn scan_emits_exactly_the_similar_candidate_pairs() {
    let corpus = labeled(240, 8);
    assert_eq!(corpus.documents.len(), 300);
    let p = params(128, 12, 0.65);
    let index = LshIndex::build(p, 5, &corpus.documents).unwrap();
    let scan = index.dedup_scan();

    let candidates: BTreeSet<(String, String)> = index.candidate_pairs().into_iter().collect();
    let expected: BTreeSet<(String, String)> = all_pairs(&corpus.documents, p.n)
        .into_iter()
        .filter(|(a, b, j)| *j >= p.threshold && candidates.contains(&(a.clone(), b.clone())))
        .map(|(a, b, _)| (a, b))
        .collect();
    let emitted: BTreeSet<(String, String)> = scan
        .pairs
        .iter()
        .map(|x| (x.id_a.clone(), x.id_b.clone()))
        .collect();
    assert_eq!(emitted, expected);

    // sorted, canonical, no mirrors
    assert!(scan
        .pairs
        .windows(2)
        .all(|w| (&w[0].id_a, &w[0].id_b) < (&w[1].id_a, &w[1].id_b)));
    assert!(scan
        .pairs
        .iter()
        .all(|x| x.id_a < x.id_b && x.similarity >= p.threshold));
}

#[test]
fn scan_work_is_bucket_local() {
    let corpus = labeled(160, 12);
    let index = LshIndex::build(params(64, 12, 0.75), 2, &corpus.documents).unwrap();
    let scan = index.dedup_scan();
    let bound: usize = index.bucket_sizes().iter().map(|s| s * (s - 1) / 2).sum();
    assert_eq!(scan.verified_pairs, index.candidate_pairs().len());
    assert!(scan.verified_pairs <= bound);
}

#[test]
fn scan_is_deterministic() {
    let corpus = labeled(120, 6);
    let p = params(128, 12, 0.65);
    let a = LshIndex::build(p, 9, &corpus.documents)
        .unwrap()
        .dedup_scan();
    let b = LshIndex::build(p, 9, &corpus.documents)
        .unwrap()
        .dedup_scan();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn synthetic_ninety_percent_copy_verifies() {
    let corpus = short_articles(40, 31);
    let cfg = SynthConfig {
        resemblance_low: 0.89,
        resemblance_high: 0.91,
        donor_article_count: 10,
        donor_pool_size: 60,
        ..SynthConfig::default()
    };
    let (pool, remaining) = build_donor_pool(&corpus, &cfg).unwrap();
    let source = &remaining[0];
    let copy = perturb(
        source,
        &pool.sentences,
        &cfg,
        &mut document_rng(3, &source.id),
    )
    .unwrap();
    let copy = Document::new("copy", copy.text);

    let p = params(128, 12, 0.65);
    let j = set_jaccard(&window_set(&source.text, 12), &window_set(&copy.text, 12));
    assert!(j >= p.threshold, "oracle J {j}");

    let index = LshIndex::build(p, 1, &[source.clone(), copy]).unwrap();
    let pair = index
        .verify(&source.id, "copy")
        .unwrap()
        .expect("pair above threshold");
    assert!((pair.similarity - j).abs() < 1e-9);
}
