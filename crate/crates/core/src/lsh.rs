//! Banded LSH index over MinHash signatures.
//!
//! A signature of `k` values is cut into `b` bands of `r` rows. Documents
//! whose values agree on an entire band share a bucket, and only documents
//! sharing at least one bucket are compared, so the scan does work roughly
//! proportional to the number of documents rather than to all pairs.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::minhash::{estimate_jaccard, exact_jaccard, HashFamily, MinHashSignature};
use crate::text::{shingle, Document, ShingleSet};

/// Buckets above this size are reported when scanned.
pub const DEFAULT_BUCKET_CAP: usize = 10_000;

const BAND_KEY_SEED: u64 = 0x4241_4e44_4b45_5931;

/// Points of the midpoint rule used by [`choose_bands`].
const BAND_QUADRATURE_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// True Jaccard over stored shingle sets.
    Exact,
    /// Signature agreement; shingle sets are not kept.
    Estimate,
}

impl std::str::FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(VerifyMode::Exact),
            "estimate" => Ok(VerifyMode::Estimate),
            other => Err(Error::InvalidParameter(format!(
                "unknown verify mode {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerifyMode::Exact => "exact",
            VerifyMode::Estimate => "estimate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    /// Number of hash functions (signature length).
    pub k: usize,
    /// Shingle size in characters.
    pub n: usize,
    pub threshold: f64,
    pub bands: usize,
    pub rows: usize,
    pub verify_mode: VerifyMode,
}

impl LshParams {
    /// Parameters with bands and rows chosen by [`choose_bands`].
    pub fn new(k: usize, n: usize, threshold: f64, verify_mode: VerifyMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        check_threshold(threshold)?;
        let (bands, rows) = choose_bands(k, threshold);
        let params = Self {
            k,
            n,
            threshold,
            bands,
            rows,
            verify_mode,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.bands == 0 || self.rows == 0 {
            return Err(Error::InvalidParameter(format!(
                "k, n, bands and rows must be positive (k={}, n={}, b={}, r={})",
                self.k, self.n, self.bands, self.rows
            )));
        }
        check_threshold(self.threshold)?;
        if self.bands * self.rows > self.k {
            return Err(Error::InvalidParameter(format!(
                "bands*rows = {} exceeds k = {}",
                self.bands * self.rows,
                self.k
            )));
        }
        Ok(())
    }

    /// Probability that a pair with Jaccard `s` shares at least one bucket.
    pub fn candidate_probability(&self, s: f64) -> f64 {
        candidate_probability(s, self.bands, self.rows)
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {t}"
        )));
    }
    Ok(())
}

pub fn candidate_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

fn midpoint_integral(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let step = (hi - lo) / BAND_QUADRATURE_POINTS as f64;
    (0..BAND_QUADRATURE_POINTS)
        .map(|i| f(lo + (i as f64 + 0.5) * step))
        .sum::<f64>()
        * step
}

/// Area under the candidate curve below the threshold.
pub fn false_positive_area(t: f64, bands: usize, rows: usize) -> f64 {
    midpoint_integral(0.0, t, |s| candidate_probability(s, bands, rows))
}

/// Area above the candidate curve beyond the threshold.
pub fn false_negative_area(t: f64, bands: usize, rows: usize) -> f64 {
    midpoint_integral(t, 1.0, |s| 1.0 - candidate_probability(s, bands, rows))
}

/// Picks `(bands, rows)` with `bands * rows <= k` minimizing the sum of the
/// false-positive and false-negative areas. Ties go to the larger
/// `bands * rows`, then to more bands.
pub fn choose_bands(k: usize, t: f64) -> (usize, usize) {
    let mut best = (1, 1);
    let mut best_err = f64::INFINITY;
    for b in 1..=k {
        for r in 1..=k / b {
            let err = false_positive_area(t, b, r) + false_negative_area(t, b, r);
            let better =
                err < best_err || (err == best_err && (b * r, b) > (best.0 * best.1, best.0));
            if better {
                best = (b, r);
                best_err = err;
            }
        }
    }
    best
}

/// Hash of one band of signature values; the band index is part of the seed
/// so equal values in different bands never share a key.
pub fn band_key(band: usize, values: &[u64]) -> u64 {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    xxh3_64_with_seed(
        &bytes,
        BAND_KEY_SEED ^ (band as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub id_a: String,
    pub id_b: String,
    pub similarity: f64,
}

/// A connected component of the duplicate-pair graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Retained copy: the lexicographically smallest id.
    pub representative: String,
    /// Removable copies, sorted.
    pub members: Vec<String>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Pairs passing the threshold, sorted by `(id_a, id_b)`.
    pub pairs: Vec<DuplicatePair>,
    /// Clusters sorted by representative.
    pub clusters: Vec<Cluster>,
    /// Number of distinct co-bucketed pairs that were verified.
    pub verified_pairs: usize,
}

impl ScanResult {
    pub fn removable_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }
}

/// Positions of a verified pair and their similarity.
type VerifiedHit = (u32, u32, f64);

#[derive(Debug, Clone)]
pub struct LshIndex {
    pub(crate) params: LshParams,
    pub(crate) family: HashFamily,
    pub(crate) ids: Vec<String>,
    pub(crate) lookup: HashMap<String, u32>,
    pub(crate) signatures: Vec<MinHashSignature>,
    /// `bands` keys per document, document-major.
    pub(crate) band_keys: Vec<u64>,
    pub(crate) buckets: Vec<HashMap<u64, Vec<u32>>>,
    pub(crate) shingles: Option<Vec<ShingleSet>>,
    pub(crate) bucket_cap: usize,
}

impl LshIndex {
    pub fn new(params: LshParams, family_seed: u64) -> Result<Self> {
        params.validate()?;
        let family = HashFamily::new(params.k, family_seed)?;
        Ok(Self {
            params,
            family,
            ids: Vec::new(),
            lookup: HashMap::new(),
            signatures: Vec::new(),
            band_keys: Vec::new(),
            buckets: (0..params.bands).map(|_| HashMap::new()).collect(),
            shingles: (params.verify_mode == VerifyMode::Exact).then(Vec::new),
            bucket_cap: DEFAULT_BUCKET_CAP,
        })
    }

    /// Builds an index over `docs`. Shingling and signing run in parallel;
    /// bucket insertion follows input order.
    pub fn build(params: LshParams, family_seed: u64, docs: &[Document]) -> Result<Self> {
        let mut index = Self::new(params, family_seed)?;
        index.insert_all(docs)?;
        Ok(index)
    }

    pub fn with_bucket_cap(mut self, cap: usize) -> Self {
        self.bucket_cap = cap;
        self
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    pub fn family_seed(&self) -> u64 {
        self.family.seed()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.lookup.contains_key(id)
    }

    /// Document ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn signature(&self, id: &str) -> Result<&MinHashSignature> {
        Ok(&self.signatures[self.position(id)? as usize])
    }

    pub fn shingle_set(&self, id: &str) -> Result<Option<&ShingleSet>> {
        let pos = self.position(id)? as usize;
        Ok(self.shingles.as_ref().map(|s| &s[pos]))
    }

    fn position(&self, id: &str) -> Result<u32> {
        self.lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn insert(&mut self, doc: &Document) -> Result<()> {
        if self.contains(&doc.id) {
            return Err(Error::DuplicateId(doc.id.clone()));
        }
        let set = shingle(doc, self.params.n);
        let sig = self.family.sign(&set);
        self.push(doc.id.clone(), sig, set);
        Ok(())
    }

    /// Inserts an already shingled document. The set's `n` must match the index.
    pub fn insert_shingles(&mut self, set: ShingleSet) -> Result<()> {
        if set.n != self.params.n {
            return Err(Error::IncompatibleShingles(set.n, self.params.n));
        }
        if self.contains(&set.doc_id) {
            return Err(Error::DuplicateId(set.doc_id.clone()));
        }
        let sig = self.family.sign(&set);
        self.push(set.doc_id.clone(), sig, set);
        Ok(())
    }

    pub fn insert_all(&mut self, docs: &[Document]) -> Result<()> {
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(docs.len());
        for doc in docs {
            if self.contains(&doc.id) || seen.insert(doc.id.as_str(), ()).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        let n = self.params.n;
        let family = &self.family;
        let signed: Vec<(MinHashSignature, ShingleSet)> = docs
            .par_iter()
            .map(|doc| {
                let set = shingle(doc, n);
                (family.sign(&set), set)
            })
            .collect();
        for (doc, (sig, set)) in docs.iter().zip(signed) {
            self.push(doc.id.clone(), sig, set);
        }
        Ok(())
    }

    fn push(&mut self, id: String, sig: MinHashSignature, set: ShingleSet) {
        let pos = self.ids.len() as u32;
        let rows = self.params.rows;
        for band in 0..self.params.bands {
            let key = band_key(band, &sig.values[band * rows..(band + 1) * rows]);
            self.band_keys.push(key);
            self.buckets[band].entry(key).or_default().push(pos);
        }
        if let Some(store) = self.shingles.as_mut() {
            store.push(set);
        }
        self.lookup.insert(id.clone(), pos);
        self.ids.push(id);
        self.signatures.push(sig);
    }

    /// Positions co-bucketed with `pos` in any band, sorted, excluding `pos`.
    pub(crate) fn candidate_positions(&self, pos: u32) -> Vec<u32> {
        let bands = self.params.bands;
        let mut out = Vec::new();
        for band in 0..bands {
            let key = self.band_keys[pos as usize * bands + band];
            if let Some(bucket) = self.buckets[band].get(&key) {
                out.extend(bucket.iter().copied().filter(|&p| p != pos));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Ids sharing at least one bucket with `id`, sorted.
    pub fn candidates(&self, id: &str) -> Result<Vec<String>> {
        let pos = self.position(id)?;
        let mut ids: Vec<String> = self
            .candidate_positions(pos)
            .into_iter()
            .map(|p| self.ids[p as usize].clone())
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// All distinct co-bucketed pairs as sorted `(id_a, id_b)` with `id_a < id_b`.
    pub fn candidate_pairs(&self) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = (0..self.len() as u32)
            .flat_map(|i| {
                self.candidate_positions(i)
                    .into_iter()
                    .filter(move |&j| j > i)
                    .map(move |j| self.canonical(i, j))
            })
            .collect();
        pairs.sort();
        pairs
    }

    /// Occupancy of every non-empty bucket across all bands.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets
            .iter()
            .flat_map(|m| m.values().map(Vec::len))
            .collect()
    }

    fn canonical(&self, i: u32, j: u32) -> (String, String) {
        let (a, b) = (&self.ids[i as usize], &self.ids[j as usize]);
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }

    pub(crate) fn similarity_at(&self, i: u32, j: u32) -> f64 {
        let (i, j) = (i as usize, j as usize);
        let sim = match &self.shingles {
            Some(store) => exact_jaccard(&store[i], &store[j]),
            None => estimate_jaccard(&self.signatures[i], &self.signatures[j]),
        };
        // both operands come from this index, so n and the family always match
        sim.expect("index-internal similarity")
    }

    /// Similarity under the index's verify mode.
    pub fn similarity(&self, id_a: &str, id_b: &str) -> Result<f64> {
        let (i, j) = (self.position(id_a)?, self.position(id_b)?);
        Ok(self.similarity_at(i, j))
    }

    /// The pair if its similarity reaches the threshold.
    pub fn verify(&self, id_a: &str, id_b: &str) -> Result<Option<DuplicatePair>> {
        let (i, j) = (self.position(id_a)?, self.position(id_b)?);
        let similarity = self.similarity_at(i, j);
        if similarity < self.params.threshold {
            return Ok(None);
        }
        let (id_a, id_b) = self.canonical(i, j);
        Ok(Some(DuplicatePair {
            id_a,
            id_b,
            similarity,
        }))
    }

    fn warn_giant_buckets(&self) {
        for (band, map) in self.buckets.iter().enumerate() {
            for bucket in map.values().filter(|b| b.len() > self.bucket_cap) {
                log::warn!(
                    "band {band}: bucket of {} documents exceeds cap {}; verifying all {} pairs",
                    bucket.len(),
                    self.bucket_cap,
                    bucket.len() * (bucket.len() - 1) / 2
                );
            }
        }
    }

    /// Verifies every co-bucketed pair once and groups the survivors into
    /// connected components.
    pub fn dedup_scan(&self) -> ScanResult {
        self.warn_giant_buckets();
        let per_doc: Vec<(usize, Vec<VerifiedHit>)> = (0..self.len() as u32)
            .into_par_iter()
            .map(|i| {
                let later: Vec<u32> = self
                    .candidate_positions(i)
                    .into_iter()
                    .filter(|&j| j > i)
                    .collect();
                let hits = later
                    .iter()
                    .filter_map(|&j| {
                        let s = self.similarity_at(i, j);
                        (s >= self.params.threshold).then_some((i, j, s))
                    })
                    .collect();
                (later.len(), hits)
            })
            .collect();

        let verified_pairs = per_doc.iter().map(|(n, _)| n).sum();
        let edges: Vec<(u32, u32, f64)> = per_doc.into_iter().flat_map(|(_, h)| h).collect();
        let clusters = self.clusters(&edges);
        let mut pairs: Vec<DuplicatePair> = edges
            .into_iter()
            .map(|(i, j, similarity)| {
                let (id_a, id_b) = self.canonical(i, j);
                DuplicatePair {
                    id_a,
                    id_b,
                    similarity,
                }
            })
            .collect();
        pairs.sort_by(|x, y| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)));
        ScanResult {
            pairs,
            clusters,
            verified_pairs,
        }
    }

    fn clusters(&self, edges: &[(u32, u32, f64)]) -> Vec<Cluster> {
        let mut sets = DisjointSets::new(self.len());
        for &(i, j, _) in edges {
            sets.union(i as usize, j as usize);
        }
        let mut groups: HashMap<usize, Vec<&str>> = HashMap::new();
        for &(i, j, _) in edges {
            for p in [i, j] {
                groups
                    .entry(sets.find(p as usize))
                    .or_default()
                    .push(&self.ids[p as usize]);
            }
        }
        let mut clusters: Vec<Cluster> = groups
            .into_values()
            .map(|mut ids| {
                ids.sort_unstable();
                ids.dedup();
                Cluster {
                    representative: ids[0].to_string(),
                    members: ids[1..].iter().map(|s| s.to_string()).collect(),
                }
            })
            .collect();
        clusters.sort_by(|a, b| a.representative.cmp(&b.representative));
        clusters
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
