//! Text normalization, sentence splitting and character n-gram shingling.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Seed of the shingle hash. Changing it invalidates every persisted index.
pub const SHINGLE_HASH_SEED: u64 = 0x5348_494e_474c_4531;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// The set of hashed character n-grams of one document.
///
/// Hashes are kept sorted and distinct, so two sets built from the same
/// windows compare equal regardless of insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub doc_id: String,
    pub n: usize,
    shingles: Vec<u64>,
}

impl ShingleSet {
    pub fn from_hashes(
        doc_id: impl Into<String>,
        n: usize,
        hashes: impl IntoIterator<Item = u64>,
    ) -> Self {
        let mut shingles: Vec<u64> = hashes.into_iter().collect();
        shingles.sort_unstable();
        shingles.dedup();
        Self {
            doc_id: doc_id.into(),
            n,
            shingles,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }

    pub fn contains(&self, hash: u64) -> bool {
        self.shingles.binary_search(&hash).is_ok()
    }

    /// Sorted, distinct shingle hashes.
    pub fn hashes(&self) -> &[u64] {
        &self.shingles
    }

    /// Size of the intersection with `other`, by a merge of the sorted hashes.
    pub fn intersection_size(&self, other: &ShingleSet) -> usize {
        let (a, b) = (&self.shingles, &other.shingles);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        common
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceList {
    pub doc_id: String,
    pub sentences: Vec<String>,
}

/// Lowercase, NFC-compose and collapse every whitespace run to a single
/// ASCII space, trimming both ends.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.nfc().collect::<String>().split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn shingle_hash(window: &str) -> u64 {
    xxh3_64_with_seed(window.as_bytes(), SHINGLE_HASH_SEED)
}

/// Hashes every `n`-character window (stride one) of the normalized text.
pub fn shingle(doc: &Document, n: usize) -> ShingleSet {
    assert!(n >= 1, "shingle size must be positive");
    let normalized = normalize(&doc.text);
    let mut bounds: Vec<usize> = normalized.char_indices().map(|(i, _)| i).collect();
    bounds.push(normalized.len());
    let chars = bounds.len() - 1;
    if chars < n {
        return ShingleSet::from_hashes(doc.id.clone(), n, std::iter::empty());
    }
    let hashes =
        (0..=chars - n).map(|start| shingle_hash(&normalized[bounds[start]..bounds[start + n]]));
    ShingleSet::from_hashes(doc.id.clone(), n, hashes)
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits raw text after each '.', '!' or '?' that is followed by
/// whitespace or the end of the text. Terminators stay with their sentence.
pub fn split_sentences(doc: &Document) -> SentenceList {
    let text = doc.text.as_str();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        let boundary = match chars.peek() {
            None => true,
            Some(&(_, next)) => next.is_whitespace(),
        };
        if boundary {
            let end = i + c.len_utf8();
            push_trimmed(&mut sentences, &text[start..end]);
            start = end;
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    SentenceList {
        doc_id: doc.id.clone(),
        sentences,
    }
}

fn push_trimmed(out: &mut Vec<String>, fragment: &str) {
    let trimmed = fragment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Whitespace tokens of the normalized text.
pub fn words(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}
