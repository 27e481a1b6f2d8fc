//! MinHash signatures over shingle sets.
//!
//! Each of the `k` hash functions is an affine map `x -> a*x + b (mod 2^64)`
//! with odd `a`, which is a bijection on 64-bit words. The signature keeps
//! the minimum image of the shingle set under each map; the fraction of
//! agreeing positions between two signatures estimates Jaccard similarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::ShingleSet;

/// Signature value of an empty shingle set.
pub const EMPTY_SENTINEL: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    seed: u64,
    multipliers: Vec<u64>,
    offsets: Vec<u64>,
}

impl HashFamily {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "number of hash functions must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut multipliers = Vec::with_capacity(k);
        let mut offsets = Vec::with_capacity(k);
        for _ in 0..k {
            multipliers.push(rng.gen::<u64>() | 1);
            offsets.push(rng.gen::<u64>());
        }
        Ok(Self {
            seed,
            multipliers,
            offsets,
        })
    }

    pub fn k(&self) -> usize {
        self.multipliers.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `(a_i, b_i)` pairs in order.
    pub fn parameters(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.multipliers
            .iter()
            .copied()
            .zip(self.offsets.iter().copied())
    }

    pub fn sign(&self, set: &ShingleSet) -> MinHashSignature {
        let mut values = vec![EMPTY_SENTINEL; self.k()];
        for &x in set.hashes() {
            for ((v, &a), &b) in values.iter_mut().zip(&self.multipliers).zip(&self.offsets) {
                let h = a.wrapping_mul(x).wrapping_add(b);
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature {
            doc_id: set.doc_id.clone(),
            family_seed: self.seed,
            empty: set.is_empty(),
            values,
        }
    }
}

/// `make_family`: `k` affine maps drawn from a ChaCha stream seeded by `seed`.
pub fn make_family(k: usize, seed: u64) -> Result<HashFamily> {
    HashFamily::new(k, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub doc_id: String,
    pub family_seed: u64,
    /// True iff the source shingle set was empty; all values are then the sentinel.
    pub empty: bool,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds a signature from stored parts, checking the empty-set invariant.
    pub fn from_parts(
        doc_id: String,
        family_seed: u64,
        empty: bool,
        values: Vec<u64>,
    ) -> Result<Self> {
        if empty && values.iter().any(|&v| v != EMPTY_SENTINEL) {
            return Err(Error::Format(format!(
                "empty signature for {doc_id:?} carries non-sentinel values"
            )));
        }
        Ok(Self {
            doc_id,
            family_seed,
            empty,
            values,
        })
    }
}

pub fn sign(set: &ShingleSet, family: &HashFamily) -> MinHashSignature {
    family.sign(set)
}

/// Fraction of agreeing signature positions.
///
/// Two empty signatures have similarity 1, an empty and a non-empty one 0.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::IncompatibleSignatures(format!(
            "k={} vs k={}",
            a.k(),
            b.k()
        )));
    }
    if a.family_seed != b.family_seed {
        return Err(Error::IncompatibleSignatures(format!(
            "family seed {} vs {}",
            a.family_seed, b.family_seed
        )));
    }
    Ok(match (a.empty, b.empty) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let agree = a
                .values
                .iter()
                .zip(&b.values)
                .filter(|(x, y)| x == y)
                .count();
            agree as f64 / a.k() as f64
        }
    })
}

/// `|A ∩ B| / |A ∪ B|`, with 1 for two empty sets and 0 when exactly one is empty.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::IncompatibleShingles(a.n, b.n));
    }
    Ok(match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let common = a.intersection_size(b);
            let union = a.cardinality() + b.cardinality() - common;
            common as f64 / union as f64
        }
    })
}
