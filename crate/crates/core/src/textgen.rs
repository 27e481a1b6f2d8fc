//! Seeded generator of plain-text article corpora.
//!
//! Used to drive benchmarks and tests when no real corpus is at hand. Each
//! article draws on a small topic vocabulary plus shared function words, so
//! articles repeat their own content words and are mutually dissimilar.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::text::Document;

const FUNCTION_WORDS: &[&str] = &[
    "the",
    "of",
    "and",
    "in",
    "to",
    "a",
    "was",
    "is",
    "for",
    "as",
    "on",
    "by",
    "with",
    "he",
    "that",
    "at",
    "from",
    "his",
    "it",
    "an",
    "were",
    "which",
    "are",
    "also",
    "be",
    "this",
    "has",
    "or",
    "had",
    "first",
    "one",
    "their",
    "its",
    "new",
    "after",
    "but",
    "who",
    "not",
    "they",
    "have",
    "her",
    "she",
    "two",
    "been",
    "other",
    "when",
    "there",
    "all",
    "during",
    "into",
    "school",
    "time",
    "may",
    "years",
    "more",
    "most",
    "only",
    "over",
    "city",
    "some",
    "world",
    "would",
    "where",
    "later",
    "up",
    "such",
    "used",
    "many",
    "can",
    "state",
    "about",
    "national",
    "out",
    "known",
    "university",
    "united",
    "then",
    "made",
    "these",
    "film",
    "both",
    "team",
    "under",
    "them",
    "between",
    "while",
    "season",
    "three",
    "each",
    "part",
    "several",
    "would",
    "south",
    "north",
    "where",
    "since",
    "through",
    "early",
    "well",
    "being",
    "became",
    "second",
    "until",
    "high",
    "against",
    "however",
    "before",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br",
    "cl", "dr", "fr", "gr", "pl", "pr", "st", "tr", "th", "sh", "ch",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "io", "ou", "y"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "m", "t", "nd", "rk", "st"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextGenConfig {
    pub seed: u64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Content words private to each article's topic.
    pub topic_size: usize,
    pub vocab_size: usize,
    /// Share of tokens drawn from function words / the topic; the rest come
    /// from the global vocabulary.
    pub function_share: f64,
    pub topic_share: f64,
}

impl Default for TextGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_sentences: 20,
            max_sentences: 40,
            min_words: 6,
            max_words: 24,
            topic_size: 60,
            vocab_size: 20_000,
            function_share: 0.45,
            topic_share: 0.35,
        }
    }
}

pub struct CorpusGenerator {
    config: TextGenConfig,
    vocab: Vec<String>,
    vocab_dist: WeightedIndex<f64>,
    function_dist: WeightedIndex<f64>,
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n)
        .map(|rank| 1.0 / (rank as f64).powf(exponent))
        .collect()
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(NUCLEI[rng.gen_range(0..NUCLEI.len())]);
    }
    w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
    w
}

impl CorpusGenerator {
    pub fn new(config: TextGenConfig) -> Self {
        assert!(config.min_sentences >= 1 && config.min_sentences <= config.max_sentences);
        assert!(config.min_words >= 1 && config.min_words <= config.max_words);
        assert!(config.topic_size >= 1 && config.vocab_size >= config.topic_size);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0076_6f63_6162);
        let mut seen = std::collections::HashSet::new();
        let mut vocab = Vec::with_capacity(config.vocab_size);
        while vocab.len() < config.vocab_size {
            let w = pseudo_word(&mut rng);
            if !FUNCTION_WORDS.contains(&w.as_str()) && seen.insert(w.clone()) {
                vocab.push(w);
            }
        }
        Self {
            vocab_dist: WeightedIndex::new(zipf_weights(config.vocab_size, 1.0))
                .expect("non-empty vocabulary"),
            function_dist: WeightedIndex::new(zipf_weights(FUNCTION_WORDS.len(), 1.0))
                .expect("non-empty"),
            config,
            vocab,
        }
    }

    /// Article `index`; independent of every other article.
    pub fn article(&self, index: usize) -> Document {
        let c = &self.config;
        let mut rng =
            ChaCha8Rng::seed_from_u64(c.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
        let topic: Vec<&str> = (0..c.topic_size)
            .map(|_| self.vocab[rng.gen_range(0..self.vocab.len())].as_str())
            .collect();
        let topic_dist =
            WeightedIndex::new(zipf_weights(topic.len(), 0.8)).expect("non-empty topic");
        let sentences = rng.gen_range(c.min_sentences..=c.max_sentences);
        let mut text = String::new();
        for s in 0..sentences {
            if s > 0 {
                text.push(' ');
            }
            let len = rng.gen_range(c.min_words..=c.max_words);
            for w in 0..len {
                let roll: f64 = rng.gen();
                let word = if roll < c.function_share {
                    FUNCTION_WORDS[self.function_dist.sample(&mut rng)]
                } else if roll < c.function_share + c.topic_share {
                    topic[topic_dist.sample(&mut rng)]
                } else {
                    self.vocab[self.vocab_dist.sample(&mut rng)].as_str()
                };
                if w == 0 {
                    let mut chars = word.chars();
                    if let Some(first) = chars.next() {
                        text.extend(first.to_uppercase());
                        text.push_str(chars.as_str());
                    }
                } else {
                    text.push(' ');
                    text.push_str(word);
                    if w + 1 < len && rng.gen_bool(0.06) {
                        text.push(',');
                    }
                }
            }
            let end = match rng.gen_range(0..20) {
                0 => '?',
                1 => '!',
                _ => '.',
            };
            text.push(end);
        }
        Document::new(format!("doc{index:06}"), text)
    }

    pub fn articles(&self, count: usize) -> Vec<Document> {
        (0..count)
            .into_par_iter()
            .map(|i| self.article(i))
            .collect()
    }
}

/// `count` articles with default settings and the given seed.
pub fn generate_corpus(count: usize, seed: u64) -> Vec<Document> {
    CorpusGenerator::new(TextGenConfig {
        seed,
        ..TextGenConfig::default()
    })
    .articles(count)
}
