#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use dedupkit::synth::{synthesize, LabeledCorpus, SynthConfig};
use dedupkit::text::{normalize, Document};
use dedupkit::textgen::{CorpusGenerator, TextGenConfig};

/// Articles of 10-14 sentences: long enough to perturb, cheap to index.
pub fn short_articles(count: usize, seed: u64) -> Vec<Document> {
    CorpusGenerator::new(TextGenConfig {
        seed,
        min_sentences: 10,
        max_sentences: 14,
        ..TextGenConfig::default()
    })
    .articles(count)
}

/// Labeled corpus with `originals` originals and a quarter as many duplicates.
pub fn labeled(originals: usize, seed: u64) -> LabeledCorpus {
    let donors = 20;
    let cfg = SynthConfig {
        donor_article_count: donors,
        donor_pool_size: 150,
        rng_seed: seed,
        ..SynthConfig::default()
    };
    synthesize(&short_articles(originals + donors, seed), &cfg).unwrap()
}

/// Character windows hashed with the std hasher, straight from a char scan.
pub fn window_set(text: &str, n: usize) -> HashSet<u64> {
    let chars: Vec<char> = normalize(text).chars().collect();
    let mut out = HashSet::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            let mut h = DefaultHasher::new();
            w.hash(&mut h);
            out.insert(h.finish());
        }
    }
    out
}

pub fn set_jaccard(a: &HashSet<u64>, b: &HashSet<u64>) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let inter = a.iter().filter(|x| b.contains(x)).count();
            inter as f64 / (a.len() + b.len() - inter) as f64
        }
    }
}

/// All pairs `(a, b, J)` with `a < b`, by brute force.
pub fn all_pairs(docs: &[Document], n: usize) -> Vec<(String, String, f64)> {
    let sets: Vec<HashSet<u64>> = docs.iter().map(|d| window_set(&d.text, n)).collect();
    let mut out = Vec::new();
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            let (a, b) = if docs[i].id < docs[j].id {
                (i, j)
            } else {
                (j, i)
            };
            out.push((
                docs[a].id.clone(),
                docs[b].id.clone(),
                set_jaccard(&sets[i], &sets[j]),
            ));
        }
    }
    out
}
