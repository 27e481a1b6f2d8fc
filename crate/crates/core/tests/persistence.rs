mod common;

use dedupkit::io::{load_index, read_labeled, save_index, write_labeled};
use dedupkit::lsh::{LshIndex, LshParams, VerifyMode};
use dedupkit::Error;

#[test]
fn thousand_document_index_round_trip() {
    let corpus = common::labeled(800, 3);
    assert_eq!(corpus.documents.len(), 1000);
    let params = LshParams::new(128, 12, 0.65, VerifyMode::Exact).unwrap();
    let index = LshIndex::build(params, 11, &corpus.documents).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.idx");
    save_index(&index, &path).unwrap();
    let loaded = load_index(&path).unwrap();

    assert_eq!(loaded.len(), 1000);
    assert_eq!(loaded.params(), index.params());
    assert_eq!(loaded.family_seed(), 11);
    let original = serde_json::to_vec(&index.dedup_scan()).unwrap();
    assert_eq!(serde_json::to_vec(&loaded.dedup_scan()).unwrap(), original);
    for d in corpus.documents.iter().step_by(37) {
        assert_eq!(
            loaded.candidates(&d.id).unwrap(),
            index.candidates(&d.id).unwrap()
        );
        assert_eq!(
            loaded.signature(&d.id).unwrap(),
            index.signature(&d.id).unwrap()
        );
    }

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    assert!(matches!(load_index(&path), Err(Error::Checksum)));
}

#[test]
fn labeled_jsonl_round_trip() {
    let corpus = common::labeled(40, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.jsonl");
    write_labeled(&path, &corpus).unwrap();
    let back = read_labeled(&path).unwrap();
    assert_eq!(back.documents, corpus.documents);
    assert_eq!(back.labels, corpus.labels);
    assert_eq!(back.provenance, corpus.provenance);
    let first = std::fs::read_to_string(&path).unwrap();
    let line = first.lines().next().unwrap();
    assert!(
        line.contains("\"label\":\"original\"") && line.contains("\"source_id\":null"),
        "{line}"
    );
}
