//! Near-duplicate text detection with MinHash LSH.
//!
//! The pipeline is: [`text`] normalizes documents and extracts character
//! n-gram shingles, [`minhash`] summarizes shingle sets as signatures,
//! [`lsh`] bands signatures into buckets and verifies co-bucketed pairs
//! against a Jaccard threshold. [`synth`] builds labeled near-duplicate
//! benchmarks from a clean corpus and [`eval`] scores a detector on them
//! (ROC/AUC, timing, hyperparameter sweeps).

pub mod error;
pub mod eval;
pub mod io;
pub mod lsh;
pub mod minhash;
pub mod synth;
pub mod text;
pub mod textgen;

pub use error::{Error, Result};
pub use eval::{EvalOptions, EvalReport, ScoreMode, SweepGrid};
pub use lsh::{Cluster, DuplicatePair, LshIndex, LshParams, ScanResult, VerifyMode};
pub use minhash::{HashFamily, MinHashSignature};
pub use synth::{Label, LabeledCorpus, SynthConfig};
pub use text::{Document, SentenceList, ShingleSet};
