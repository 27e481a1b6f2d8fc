mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use common::{labeled, set_jaccard, short_articles, window_set};
use dedupkit::eval::{
    duplication_percentage, evaluate, score_documents, sweep, EvalOptions, ScoreMode, SweepGrid,
};
use dedupkit::lsh::{LshIndex, LshParams, VerifyMode};
use dedupkit::synth::{Label, LabeledCorpus};
use dedupkit::text::Document;

fn best_config() -> LshParams {
    LshParams::new(128, 12, 0.65, VerifyMode::Exact).unwrap()
}

/// Max brute-force Jaccard over co-bucketed documents, optionally only
/// those with a smaller id.
fn naive_scores(
    index: &LshIndex,
    corpus: &LabeledCorpus,
    earlier_only: bool,
) -> BTreeMap<String, f64> {
    let n = index.params().n;
    let sets: HashMap<&str, _> = corpus
        .documents
        .iter()
        .map(|d| (d.id.as_str(), window_set(&d.text, n)))
        .collect();
    let mut scores = BTreeMap::new();
    for d in &corpus.documents {
        let mut best = 0.0f64;
        for c in index.candidates(&d.id).unwrap() {
            if earlier_only && c >= d.id {
                continue;
            }
            best = best.max(set_jaccard(&sets[d.id.as_str()], &sets[c.as_str()]));
        }
        scores.insert(d.id.clone(), best);
    }
    scores
}

#[test]
fn scores_match_naive_double_loop() {
    let corpus = labeled(160, 40);
    assert_eq!(corpus.documents.len(), 200);
    let index = LshIndex::build(best_config(), 4, &corpus.documents).unwrap();
    for (mode, earlier) in [(ScoreMode::Symmetric, false), (ScoreMode::Removal, true)] {
        let got = score_documents(&index, &corpus, mode).unwrap();
        let want = naive_scores(&index, &corpus, earlier);
        assert_eq!(got.len(), want.len());
        for (id, s) in &want {
            assert!(
                (got[id] - s).abs() < 1e-9,
                "{mode:?} {id}: {} vs {s}",
                got[id]
            );
        }
    }
}

#[test]
fn isolated_and_copied_documents() {
    let mut docs = short_articles(3, 2);
    docs.push(Document::new("doc000000#copy", docs[0].text.clone()));
    let labels = docs
        .iter()
        .map(|d| {
            let l = if d.id.ends_with("#copy") {
                Label::Duplicate
            } else {
                Label::Original
            };
            (d.id.clone(), l)
        })
        .collect();
    let corpus = LabeledCorpus {
        documents: docs,
        labels,
        provenance: BTreeMap::new(),
        donor_ids: vec![],
    };
    let index = LshIndex::build(best_config(), 1, &corpus.documents).unwrap();
    let scores = score_documents(&index, &corpus, ScoreMode::Removal).unwrap();
    assert_eq!(scores["doc000001"], 0.0);
    assert_eq!(scores["doc000000#copy"], 1.0);
    assert_eq!(scores["doc000000"], 0.0);
    let sym = score_documents(&index, &corpus, ScoreMode::Symmetric).unwrap();
    assert_eq!(sym["doc000000"], 1.0);

    let other = LshIndex::build(best_config(), 1, &corpus.documents[..2]).unwrap();
    assert!(score_documents(&other, &corpus, ScoreMode::Removal).is_err());
}

#[test]
fn verbatim_duplicates_give_perfect_auc() {
    let docs = short_articles(60, 5);
    let mut documents = docs.clone();
    let mut labels: BTreeMap<String, Label> = docs
        .iter()
        .map(|d| (d.id.clone(), Label::Original))
        .collect();
    let mut provenance = BTreeMap::new();
    for d in docs.iter().take(15) {
        let id = format!("{}#dup", d.id);
        documents.push(Document::new(id.clone(), d.text.clone()));
        labels.insert(id.clone(), Label::Duplicate);
        provenance.insert(id, d.id.clone());
    }
    let corpus = LabeledCorpus {
        documents,
        labels,
        provenance,
        donor_ids: vec![],
    };
    let start = Instant::now();
    let report = evaluate(&corpus, best_config(), &EvalOptions::default()).unwrap();
    let wall = start.elapsed().as_secs_f64();
    assert_eq!(report.auc, 1.0);
    assert_eq!(report.duplicate_pairs_found, 15);
    assert!(report.build_seconds > 0.0 && report.scan_seconds > 0.0);
    assert!(report.build_seconds + report.scan_seconds <= wall);
    assert_eq!(report.roc.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
    assert_eq!(report.roc.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
}

#[test]
fn evaluation_is_deterministic_apart_from_timing() {
    let corpus = labeled(120, 9);
    let a = evaluate(&corpus, best_config(), &EvalOptions::default()).unwrap();
    let b = evaluate(&corpus, best_config(), &EvalOptions::default()).unwrap();
    assert_eq!(
        (a.auc, &a.roc, a.duplicate_pairs_found),
        (b.auc, &b.roc, b.duplicate_pairs_found)
    );
}

#[test]
fn singleton_sweep_equals_direct_evaluation() {
    let corpus = labeled(100, 13);
    let grid = SweepGrid {
        permutation_values: vec![128],
        ngram_values: vec![12],
        threshold_values: vec![0.65],
        verify_mode: VerifyMode::Exact,
    };
    let cells = sweep(&corpus, &grid, &EvalOptions::default()).unwrap();
    assert_eq!(cells.len(), 1);
    assert!(cells[0].top);
    let swept = cells[0].report.as_ref().unwrap();
    let direct = evaluate(&corpus, best_config(), &EvalOptions::default()).unwrap();
    assert_eq!(swept.params, direct.params);
    assert_eq!(swept.auc, direct.auc);
    assert_eq!(swept.roc, direct.roc);
}

#[test]
fn sweep_orders_by_auc_and_replays() {
    let corpus = labeled(100, 14);
    let grid = SweepGrid {
        permutation_values: vec![16, 64],
        ngram_values: vec![12],
        threshold_values: vec![0.65, 0.9],
        verify_mode: VerifyMode::Exact,
    };
    let first = sweep(&corpus, &grid, &EvalOptions::default()).unwrap();
    assert_eq!(first.len(), 4);
    let aucs: Vec<f64> = first
        .iter()
        .map(|c| c.report.as_ref().unwrap().auc)
        .collect();
    assert!(aucs.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(first.iter().filter(|c| c.top).count(), 3);
    let again = sweep(&corpus, &grid, &EvalOptions::default()).unwrap();
    let replay: Vec<f64> = again
        .iter()
        .map(|c| c.report.as_ref().unwrap().auc)
        .collect();
    assert_eq!(aucs, replay);
}

#[test]
fn duplication_percentage_tracks_labels() {
    let corpus = labeled(400, 17);
    let truth = corpus.count(Label::Duplicate) as f64 / corpus.documents.len() as f64;
    let measured = duplication_percentage(&corpus.documents, best_config(), 1).unwrap();
    assert!(
        (measured - truth).abs() <= 0.05,
        "measured {measured} vs {truth}"
    );
    assert!(measured <= 1.0 - 1.0 / corpus.documents.len() as f64);
}
