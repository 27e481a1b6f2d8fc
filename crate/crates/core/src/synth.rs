//! Labeled near-duplicate benchmark construction.
//!
//! A held-out set of donor articles supplies foreign sentences. Selected
//! source articles are copied with some sentences removed and some donor
//! sentences inserted, until the copy's resemblance to its source lands in
//! a configured band.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::minhash::exact_jaccard;
use crate::text::{shingle, split_sentences, words, Document};

const DONOR_STREAM: u64 = 0x0064_6f6e_6f72;
const SOURCE_STREAM: u64 = 0x736f_7572_6365;

/// Slack when turning `fraction * count` into a whole number of duplicates,
/// so that e.g. 1258/5028 * 5028 does not round up to 1259.
const COUNT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Original,
    Duplicate,
}

/// How resemblance between a source and its synthetic copy is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResemblanceMetric {
    /// Jaccard over the sets of whitespace tokens of the normalized texts.
    WordSet,
    /// Jaccard over character n-gram shingle sets.
    CharShingles { n: usize },
}

impl ResemblanceMetric {
    pub fn measure(&self, a: &str, b: &str) -> f64 {
        match *self {
            ResemblanceMetric::WordSet => word_set_jaccard(&word_set(a), &word_set(b)),
            ResemblanceMetric::CharShingles { n } => {
                let sa = shingle(&Document::new("a", a), n);
                let sb = shingle(&Document::new("b", b), n);
                exact_jaccard(&sa, &sb).expect("same n")
            }
        }
    }
}

fn word_set(text: &str) -> HashSet<String> {
    words(text).into_iter().collect()
}

fn word_set_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let common = a.intersection(b).count();
    common as f64 / (a.len() + b.len() - common) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duplicate_fraction: f64,
    pub resemblance_low: f64,
    pub resemblance_high: f64,
    pub donor_pool_size: usize,
    pub donor_article_count: usize,
    /// Word-count bounds of donor sentences, inclusive.
    pub donor_len_min: usize,
    pub donor_len_max: usize,
    pub rng_seed: u64,
    pub metric: ResemblanceMetric,
    /// Restarts allowed per document before giving up on the band.
    pub max_attempts: usize,
    /// Articles with fewer sentences are never used as sources.
    pub min_source_sentences: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duplicate_fraction: 0.25,
            resemblance_low: 0.87,
            resemblance_high: 0.94,
            donor_pool_size: 2000,
            donor_article_count: 300,
            donor_len_min: 8,
            donor_len_max: 20,
            rng_seed: 0,
            metric: ResemblanceMetric::WordSet,
            max_attempts: 50,
            min_source_sentences: 10,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..1.0).contains(&self.duplicate_fraction) {
            return bad(format!(
                "duplicate fraction must lie in [0, 1), got {}",
                self.duplicate_fraction
            ));
        }
        if !(0.0 < self.resemblance_low
            && self.resemblance_low < self.resemblance_high
            && self.resemblance_high < 1.0)
        {
            return bad(format!(
                "resemblance band must satisfy 0 < low < high < 1, got [{}, {}]",
                self.resemblance_low, self.resemblance_high
            ));
        }
        if self.donor_pool_size == 0 || self.donor_article_count == 0 {
            return bad("donor pool size and donor article count must be positive".into());
        }
        if self.donor_len_min == 0 || self.donor_len_min > self.donor_len_max {
            return bad(format!(
                "donor length bounds [{}, {}] are invalid",
                self.donor_len_min, self.donor_len_max
            ));
        }
        if self.max_attempts == 0 {
            return bad("max attempts must be positive".into());
        }
        if let ResemblanceMetric::CharShingles { n: 0 } = self.metric {
            return bad("shingle size must be positive".into());
        }
        Ok(())
    }

    /// Number of duplicates requested for `originals` source-eligible-or-not articles.
    pub fn duplicate_count(&self, originals: usize) -> usize {
        let raw = self.duplicate_fraction * originals as f64;
        (raw - COUNT_EPSILON).ceil().max(0.0) as usize
    }

    pub fn in_band(&self, resemblance: f64) -> bool {
        (self.resemblance_low..=self.resemblance_high).contains(&resemblance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DonorPool {
    pub sentences: Vec<String>,
    /// Articles the sentences were drawn from, in corpus order.
    pub donor_ids: Vec<String>,
}

/// Removes `donor_article_count` seeded-random articles from the corpus and
/// collects `donor_pool_size` distinct sentences of acceptable length from them.
pub fn build_donor_pool(
    corpus: &[Document],
    cfg: &SynthConfig,
) -> Result<(DonorPool, Vec<Document>)> {
    cfg.validate()?;
    if corpus.len() <= cfg.donor_article_count {
        return Err(Error::CorpusTooSmall(format!(
            "{} articles, need more than {} donor articles",
            corpus.len(),
            cfg.donor_article_count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ DONOR_STREAM);
    let mut donor_idx =
        rand::seq::index::sample(&mut rng, corpus.len(), cfg.donor_article_count).into_vec();
    donor_idx.sort_unstable();

    let mut seen = HashSet::new();
    let mut qualifying = Vec::new();
    for &i in &donor_idx {
        for sentence in split_sentences(&corpus[i]).sentences {
            let len = sentence.split_whitespace().count();
            if (cfg.donor_len_min..=cfg.donor_len_max).contains(&len)
                && seen.insert(sentence.clone())
            {
                qualifying.push(sentence);
            }
        }
    }
    if qualifying.len() < cfg.donor_pool_size {
        return Err(Error::InsufficientDonors {
            needed: cfg.donor_pool_size,
            found: qualifying.len(),
        });
    }
    let mut keep =
        rand::seq::index::sample(&mut rng, qualifying.len(), cfg.donor_pool_size).into_vec();
    keep.sort_unstable();
    let sentences = keep.into_iter().map(|i| qualifying[i].clone()).collect();

    let donor_set: HashSet<usize> = donor_idx.iter().copied().collect();
    let remaining = corpus
        .iter()
        .enumerate()
        .filter(|(i, _)| !donor_set.contains(i))
        .map(|(_, d)| d.clone())
        .collect();
    let donor_ids = donor_idx.iter().map(|&i| corpus[i].id.clone()).collect();
    Ok((
        DonorPool {
            sentences,
            donor_ids,
        },
        remaining,
    ))
}

/// Result of perturbing one article.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub text: String,
    pub resemblance: f64,
    pub removed: usize,
    pub inserted: usize,
    pub attempts: usize,
}

/// Builds a near-duplicate of `doc` by removing sentences and inserting
/// donor sentences at random positions, one edit at a time, until the
/// resemblance falls inside the band. An attempt that overshoots the band is
/// abandoned and restarted from the unedited article.
pub fn perturb(
    doc: &Document,
    donors: &[String],
    cfg: &SynthConfig,
    rng: &mut impl Rng,
) -> Result<Perturbation> {
    let original = split_sentences(doc).sentences;
    if original.len() < cfg.min_source_sentences {
        return Err(Error::InvalidParameter(format!(
            "document {:?} has {} sentences, perturbation needs at least {}",
            doc.id,
            original.len(),
            cfg.min_source_sentences
        )));
    }
    if donors.is_empty() {
        return Err(Error::InsufficientDonors {
            needed: 1,
            found: 0,
        });
    }
    let reference = original.join(" ");
    let reference_words = match cfg.metric {
        ResemblanceMetric::WordSet => Some(word_set(&reference)),
        ResemblanceMetric::CharShingles { .. } => None,
    };
    let measure = |text: &str| match &reference_words {
        Some(set) => word_set_jaccard(set, &word_set(text)),
        None => cfg.metric.measure(&reference, text),
    };
    // an article can at most be emptied and doubled
    let max_edits = 2 * original.len();

    for attempt in 1..=cfg.max_attempts {
        let mut current = original.clone();
        let (mut removed, mut inserted) = (0, 0);
        for _ in 0..max_edits {
            if current.len() > 1 && rng.gen_bool(0.5) {
                current.remove(rng.gen_range(0..current.len()));
                removed += 1;
            } else {
                let donor = donors.choose(rng).expect("non-empty donors").clone();
                current.insert(rng.gen_range(0..=current.len()), donor);
                inserted += 1;
            }
            let text = current.join(" ");
            let resemblance = measure(&text);
            if cfg.in_band(resemblance) {
                return Ok(Perturbation {
                    text,
                    resemblance,
                    removed,
                    inserted,
                    attempts: attempt,
                });
            }
            if resemblance < cfg.resemblance_low {
                break;
            }
        }
    }
    Err(Error::BandUnreachable {
        doc_id: doc.id.clone(),
        low: cfg.resemblance_low,
        high: cfg.resemblance_high,
        attempts: cfg.max_attempts,
    })
}

/// Random stream for one document, independent of processing order.
pub fn document_rng(seed: u64, doc_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(xxh3_64_with_seed(doc_id.as_bytes(), seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub documents: Vec<Document>,
    pub labels: BTreeMap<String, Label>,
    /// Duplicate id to source id.
    pub provenance: BTreeMap<String, String>,
    pub donor_ids: Vec<String>,
}

impl LabeledCorpus {
    pub fn label(&self, id: &str) -> Option<Label> {
        self.labels.get(id).copied()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }

    /// Checks the labeling invariants: every document labeled, ids unique,
    /// every duplicate's source present and labeled original.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for d in &self.documents {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
            if !self.labels.contains_key(&d.id) {
                return Err(Error::Mismatch(format!("document {:?} has no label", d.id)));
            }
        }
        if self.labels.len() != self.documents.len() {
            return Err(Error::Mismatch(
                "labels name documents that are not in the corpus".into(),
            ));
        }
        for (dup, src) in &self.provenance {
            if self.label(dup) != Some(Label::Duplicate) {
                return Err(Error::Mismatch(format!(
                    "{dup:?} has provenance but is not labeled duplicate"
                )));
            }
            if self.label(src) != Some(Label::Original) {
                return Err(Error::Mismatch(format!(
                    "source {src:?} of {dup:?} is not an original"
                )));
            }
        }
        Ok(())
    }
}

fn duplicate_id(source: &str, taken: &HashSet<String>) -> String {
    let base = format!("{source}#dup");
    let mut id = base.clone();
    let mut n = 2;
    while taken.contains(&id) {
        id = format!("{base}{n}");
        n += 1;
    }
    id
}

/// Runs the whole construction: donor extraction, source sampling and one
/// perturbed copy per source.
///
/// Duplicate ids extend their source id (`<source>#dup`), so a duplicate
/// always sorts after its source.
pub fn synthesize(corpus: &[Document], cfg: &SynthConfig) -> Result<LabeledCorpus> {
    let (pool, remaining) = build_donor_pool(corpus, cfg)?;
    let wanted = cfg.duplicate_count(remaining.len());

    let mut eligible: Vec<usize> = (0..remaining.len())
        .into_par_iter()
        .filter(|&i| split_sentences(&remaining[i]).sentences.len() >= cfg.min_source_sentences)
        .collect();
    if eligible.len() < wanted {
        return Err(Error::CorpusTooSmall(format!(
            "{wanted} duplicates requested but only {} articles have at least {} sentences",
            eligible.len(),
            cfg.min_source_sentences
        )));
    }
    eligible.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ SOURCE_STREAM));

    let mut made: Vec<(usize, String)> = Vec::with_capacity(wanted);
    let mut next = 0;
    while made.len() < wanted {
        if next >= eligible.len() {
            return Err(Error::CorpusTooSmall(format!(
                "only {} of {wanted} requested duplicates reached the resemblance band",
                made.len()
            )));
        }
        let batch = &eligible[next..(next + wanted - made.len()).min(eligible.len())];
        next += batch.len();
        let results: Vec<(usize, Result<Perturbation>)> = batch
            .par_iter()
            .map(|&i| {
                let doc = &remaining[i];
                let mut rng = document_rng(cfg.rng_seed, &doc.id);
                (i, perturb(doc, &pool.sentences, cfg, &mut rng))
            })
            .collect();
        for (i, result) in results {
            match result {
                Ok(p) => made.push((i, p.text)),
                Err(e) => log::debug!("skipping source {:?}: {e}", remaining[i].id),
            }
        }
    }
    made.sort_by_key(|(i, _)| *i);

    let mut taken: HashSet<String> = remaining.iter().map(|d| d.id.clone()).collect();
    let mut labels: BTreeMap<String, Label> = remaining
        .iter()
        .map(|d| (d.id.clone(), Label::Original))
        .collect();
    let mut provenance = BTreeMap::new();
    let mut documents = remaining.clone();
    for (i, text) in made {
        let source = &remaining[i].id;
        let id = duplicate_id(source, &taken);
        taken.insert(id.clone());
        labels.insert(id.clone(), Label::Duplicate);
        provenance.insert(id.clone(), source.clone());
        documents.push(Document::new(id, text));
    }
    Ok(LabeledCorpus {
        documents,
        labels,
        provenance,
        donor_ids: pool.donor_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textgen::generate_corpus;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            donor_pool_size: 100,
            donor_article_count: 10,
            rng_seed: 5,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn duplicate_count_rounds_up_without_float_noise() {
        let mut cfg = SynthConfig {
            duplicate_fraction: 1258.0 / 5028.0,
            ..SynthConfig::default()
        };
        assert_eq!(cfg.duplicate_count(5028), 1258);
        cfg.duplicate_fraction = 6258.0 / 24999.0;
        assert_eq!(cfg.duplicate_count(24999), 6258);
        cfg.duplicate_fraction = 0.25;
        assert_eq!(cfg.duplicate_count(10), 3);
        cfg.duplicate_fraction = 0.0;
        assert_eq!(cfg.duplicate_count(10), 0);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = SynthConfig {
            resemblance_low: 0.95,
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthConfig {
            duplicate_fraction: 1.0,
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn donor_pool_rejects_small_corpus() {
        let corpus = generate_corpus(10, 1);
        let err = build_donor_pool(&corpus, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::CorpusTooSmall(_)));
    }

    #[test]
    fn donor_pool_reports_shortage() {
        let corpus = generate_corpus(12, 1);
        let cfg = SynthConfig {
            donor_pool_size: 100_000,
            ..small_cfg()
        };
        assert!(matches!(
            build_donor_pool(&corpus, &cfg),
            Err(Error::InsufficientDonors {
                needed: 100_000,
                ..
            })
        ));
    }

    #[test]
    fn donor_sentences_have_bounded_length() {
        let corpus = generate_corpus(40, 2);
        let (pool, remaining) = build_donor_pool(&corpus, &small_cfg()).unwrap();
        assert_eq!(pool.sentences.len(), 100);
        assert_eq!(pool.donor_ids.len(), 10);
        assert_eq!(remaining.len(), 30);
        let distinct: HashSet<&String> = pool.sentences.iter().collect();
        assert_eq!(distinct.len(), 100);
        for s in &pool.sentences {
            let words = s.split(' ').filter(|w| !w.trim().is_empty()).count();
            assert!((8..=20).contains(&words), "{s:?}");
        }
        assert!(remaining.iter().all(|d| !pool.donor_ids.contains(&d.id)));
    }

    #[test]
    fn perturb_rejects_short_documents() {
        let doc = Document::new("s", "One. Two. Three.");
        let err = perturb(
            &doc,
            &["x y z.".into()],
            &SynthConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn unedited_copy_is_outside_band() {
        let doc = &generate_corpus(1, 9)[0];
        let r = ResemblanceMetric::WordSet.measure(&doc.text, &doc.text);
        assert_eq!(r, 1.0);
        assert!(!SynthConfig::default().in_band(r));
    }

    #[test]
    fn perturb_lands_in_band_and_is_reproducible() {
        let corpus = generate_corpus(40, 3);
        let (pool, remaining) = build_donor_pool(&corpus, &small_cfg()).unwrap();
        let cfg = small_cfg();
        for doc in remaining.iter().take(10) {
            let p = perturb(doc, &pool.sentences, &cfg, &mut document_rng(1, &doc.id)).unwrap();
            assert!(cfg.in_band(p.resemblance));
            assert!(p.removed + p.inserted > 0);
            // independent recount over plain word sets
            let a: HashSet<String> = doc
                .text
                .to_lowercase()
                .split_whitespace()
                .map(String::from)
                .collect();
            let b: HashSet<String> = p
                .text
                .to_lowercase()
                .split_whitespace()
                .map(String::from)
                .collect();
            let j = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
            assert!(cfg.in_band(j), "recomputed {j}");
            let again = perturb(doc, &pool.sentences, &cfg, &mut document_rng(1, &doc.id)).unwrap();
            assert_eq!(p, again);
        }
    }

    #[test]
    fn perturb_supports_char_shingle_metric() {
        let corpus = generate_corpus(30, 4);
        let cfg = SynthConfig {
            metric: ResemblanceMetric::CharShingles { n: 12 },
            ..small_cfg()
        };
        let (pool, remaining) = build_donor_pool(&corpus, &cfg).unwrap();
        let p = perturb(
            &remaining[0],
            &pool.sentences,
            &cfg,
            &mut document_rng(0, "x"),
        )
        .unwrap();
        let j = cfg.metric.measure(&remaining[0].text, &p.text);
        assert!(cfg.in_band(j));
    }

    #[test]
    fn zero_fraction_keeps_only_originals() {
        let corpus = generate_corpus(30, 6);
        let cfg = SynthConfig {
            duplicate_fraction: 0.0,
            ..small_cfg()
        };
        let lc = synthesize(&corpus, &cfg).unwrap();
        assert_eq!(lc.documents.len(), 20);
        assert_eq!(lc.count(Label::Original), 20);
        assert!(lc.provenance.is_empty());
        lc.validate().unwrap();
    }

    #[test]
    fn synthesize_counts_and_provenance() {
        let corpus = generate_corpus(50, 7);
        let lc = synthesize(&corpus, &small_cfg()).unwrap();
        lc.validate().unwrap();
        assert_eq!(lc.count(Label::Original), 40);
        assert_eq!(lc.count(Label::Duplicate), 10);
        assert_eq!(lc.documents.len(), 50);
        for (dup, src) in &lc.provenance {
            assert!(dup.starts_with(src.as_str()) && dup > src);
        }
        let ids: HashSet<&str> = lc.documents.iter().map(|d| d.id.as_str()).collect();
        assert!(lc.donor_ids.iter().all(|d| !ids.contains(d.as_str())));
        assert_eq!(lc, synthesize(&corpus, &small_cfg()).unwrap());
    }
}
