//! Corpus ingestion, labeled-corpus JSONL and the binary index format.
//!
//! Index file layout, all integers 64-bit little-endian:
//!
//! ```text
//! magic "DDKITIDX" | version
//! family_seed | k | n | threshold (f64 bits) | bands | rows | verify_mode | N | bucket_cap
//! N x ( id_len | id bytes | empty_flag | k signature values )
//! bands x ( key_count | key_count x ( key | len | len x doc position ) )
//! exact mode only: N x ( count | count x shingle hash )
//! xxh3-64 checksum of everything above
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::{xxh3_64, Xxh3};

use crate::error::{Error, Result};
use crate::lsh::{LshIndex, LshParams, VerifyMode};
use crate::minhash::{HashFamily, MinHashSignature};
use crate::synth::{Label, LabeledCorpus};
use crate::text::{Document, ShingleSet};

pub const INDEX_MAGIC: &[u8; 8] = b"DDKITIDX";
pub const INDEX_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Jsonl,
    Directory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSource {
    pub kind: SourceKind,
    pub path: PathBuf,
}

impl CorpusSource {
    /// A directory is read file-per-document, anything else as JSONL.
    pub fn detect(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let kind = if path.is_dir() {
            SourceKind::Directory
        } else {
            SourceKind::Jsonl
        };
        Self { kind, path }
    }
}

/// One JSONL line. Unlabeled corpora carry only `id` and `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub source_id: Option<String>,
}

pub fn ingest(source: &CorpusSource) -> Result<Vec<Document>> {
    match source.kind {
        SourceKind::Jsonl => Ok(read_records(&source.path)?
            .into_iter()
            .map(|r| Document::new(r.id, r.text))
            .collect()),
        SourceKind::Directory => read_directory(&source.path),
    }
}

/// Reads JSONL records in file order. Blank lines are skipped; ids must be
/// non-empty and unique.
pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: line_no,
                reason: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: line_no,
                reason: "empty id".into(),
            });
        }
        if let Some(prev) = first_line.insert(record.id.clone(), line_no) {
            return Err(Error::DuplicateRecord {
                id: record.id,
                first: format!("line {prev}"),
                second: format!("line {line_no}"),
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn read_directory(dir: &Path) -> Result<Vec<Document>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let mut seen: HashMap<String, PathBuf> = HashMap::new();
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Format(format!("{} has no usable file stem", path.display())))?
            .to_string();
        if let Some(prev) = seen.insert(stem.clone(), path.clone()) {
            return Err(Error::DuplicateRecord {
                id: stem,
                first: prev.display().to_string(),
                second: path.display().to_string(),
            });
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        docs.push(Document::new(stem, text));
    }
    Ok(docs)
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let records = docs.iter().map(|d| CorpusRecord {
        id: d.id.clone(),
        text: d.text.clone(),
        label: None,
        source_id: None,
    });
    write_jsonl(path, records)
}

fn write_jsonl(path: &Path, records: impl Iterator<Item = CorpusRecord>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One record per document with `label` and `source_id` (null for originals).
pub fn write_labeled(path: &Path, corpus: &LabeledCorpus) -> Result<()> {
    let records = corpus.documents.iter().map(|d| CorpusRecord {
        id: d.id.clone(),
        text: d.text.clone(),
        label: corpus.label(&d.id),
        source_id: corpus.provenance.get(&d.id).cloned(),
    });
    write_jsonl(path, records)
}

/// Reads a labeled JSONL corpus; every record needs a label. Donor ids are
/// not part of the corpus file and come back empty.
pub fn read_labeled(path: &Path) -> Result<LabeledCorpus> {
    let records = read_records(path)?;
    let mut documents = Vec::with_capacity(records.len());
    let mut labels = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for (i, r) in records.into_iter().enumerate() {
        let label = r.label.ok_or_else(|| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            reason: format!("record {:?} has no label", r.id),
        })?;
        labels.insert(r.id.clone(), label);
        if let Some(src) = r.source_id {
            provenance.insert(r.id.clone(), src);
        }
        documents.push(Document::new(r.id, r.text));
    }
    let corpus = LabeledCorpus {
        documents,
        labels,
        provenance,
        donor_ids: Vec::new(),
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Content hash of a corpus: ids and texts in order.
pub fn corpus_digest(docs: &[Document]) -> u64 {
    let mut h = Xxh3::new();
    for d in docs {
        h.update(&(d.id.len() as u64).to_le_bytes());
        h.update(d.id.as_bytes());
        h.update(&(d.text.len() as u64).to_le_bytes());
        h.update(d.text.as_bytes());
    }
    h.digest()
}

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
}

pub fn encode_index(index: &LshIndex) -> Vec<u8> {
    let p = &index.params;
    let mut e = Encoder { buf: Vec::new() };
    e.buf.extend_from_slice(INDEX_MAGIC);
    e.u64(INDEX_FORMAT_VERSION);
    e.u64(index.family_seed());
    e.len(p.k);
    e.len(p.n);
    e.u64(p.threshold.to_bits());
    e.len(p.bands);
    e.len(p.rows);
    e.u64(match p.verify_mode {
        VerifyMode::Exact => 0,
        VerifyMode::Estimate => 1,
    });
    e.len(index.len());
    e.len(index.bucket_cap);

    for (id, sig) in index.ids.iter().zip(&index.signatures) {
        e.len(id.len());
        e.buf.extend_from_slice(id.as_bytes());
        e.u64(sig.empty as u64);
        for &v in &sig.values {
            e.u64(v);
        }
    }
    for band in &index.buckets {
        let mut keys: Vec<&u64> = band.keys().collect();
        keys.sort_unstable();
        e.len(keys.len());
        for key in keys {
            let docs = &band[key];
            e.u64(*key);
            e.len(docs.len());
            for &pos in docs {
                e.u64(pos as u64);
            }
        }
    }
    if let Some(store) = &index.shingles {
        for set in store {
            e.len(set.cardinality());
            for &h in set.hashes() {
                e.u64(h);
            }
        }
    }
    let checksum = xxh3_64(&e.buf);
    e.u64(checksum);
    e.buf
}

struct Decoder<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Decoder<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of index data".into()))?;
        let bytes = &self.buf[self.at..end];
        self.at = end;
        Ok(bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// A count, bounded by what the remaining bytes could hold.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let v = self.u64()?;
        let remaining = (self.buf.len() - self.at) as u64;
        if v.saturating_mul(unit.max(1) as u64) > remaining {
            return Err(Error::Format(format!("count {v} exceeds remaining data")));
        }
        Ok(v as usize)
    }
}

pub fn decode_index(bytes: &[u8]) -> Result<LshIndex> {
    if bytes.len() < INDEX_MAGIC.len() + 16 {
        return Err(Error::Checksum);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    if xxh3_64(body) != u64::from_le_bytes(trailer.try_into().expect("8 bytes")) {
        return Err(Error::Checksum);
    }
    let mut d = Decoder { buf: body, at: 0 };
    if d.take(8)? != INDEX_MAGIC {
        return Err(Error::Format("not an index file".into()));
    }
    let version = d.u64()?;
    if version != INDEX_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {version}, expected {INDEX_FORMAT_VERSION}"
        )));
    }
    let family_seed = d.u64()?;
    let params = LshParams {
        k: d.u64()? as usize,
        n: d.u64()? as usize,
        threshold: f64::from_bits(d.u64()?),
        bands: d.u64()? as usize,
        rows: d.u64()? as usize,
        verify_mode: match d.u64()? {
            0 => VerifyMode::Exact,
            1 => VerifyMode::Estimate,
            other => return Err(Error::Format(format!("unknown verify mode {other}"))),
        },
    };
    params
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;
    let count = d.len(8 * (2 + params.k))?;
    let bucket_cap = d.u64()? as usize;

    let mut index = LshIndex::new(params, family_seed)?.with_bucket_cap(bucket_cap);
    let family: &HashFamily = &index.family;
    debug_assert_eq!(family.k(), params.k);

    for pos in 0..count {
        let id_len = d.len(1)?;
        let id = std::str::from_utf8(d.take(id_len)?)
            .map_err(|_| Error::Format("document id is not UTF-8".into()))?
            .to_string();
        let empty = match d.u64()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad empty flag {other}"))),
        };
        let values = (0..params.k).map(|_| d.u64()).collect::<Result<Vec<_>>>()?;
        let sig = MinHashSignature::from_parts(id.clone(), family_seed, empty, values)?;
        if index.lookup.insert(id.clone(), pos as u32).is_some() {
            return Err(Error::Format(format!("document id {id:?} stored twice")));
        }
        index.ids.push(id);
        index.signatures.push(sig);
    }

    const UNSET: u64 = u64::MAX;
    let mut band_keys = vec![UNSET; count * params.bands];
    let mut occupied = vec![false; count * params.bands];
    for band in 0..params.bands {
        let keys = d.len(16)?;
        let map = &mut index.buckets[band];
        for _ in 0..keys {
            let key = d.u64()?;
            let len = d.len(8)?;
            let mut docs = Vec::with_capacity(len);
            for _ in 0..len {
                let pos = d.u64()? as usize;
                let slot = pos
                    .checked_mul(params.bands)
                    .map(|s| s + band)
                    .filter(|_| pos < count)
                    .ok_or_else(|| {
                        Error::Format(format!("bucket refers to document {pos} of {count}"))
                    })?;
                if occupied[slot] {
                    return Err(Error::Format(format!(
                        "document {pos} appears twice in band {band}"
                    )));
                }
                occupied[slot] = true;
                band_keys[slot] = key;
                docs.push(pos as u32);
            }
            if map.insert(key, docs).is_some() {
                return Err(Error::Format(format!("band {band} repeats key {key:#x}")));
            }
        }
    }
    if let Some(slot) = occupied.iter().position(|o| !o) {
        return Err(Error::Format(format!(
            "document {} missing from band {}",
            slot / params.bands,
            slot % params.bands
        )));
    }
    index.band_keys = band_keys;

    if let Some(store) = index.shingles.as_mut() {
        for id in &index.ids {
            let len = d.len(8)?;
            let hashes = (0..len).map(|_| d.u64()).collect::<Result<Vec<_>>>()?;
            store.push(ShingleSet::from_hashes(id.clone(), params.n, hashes));
        }
    }
    if d.at != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            body.len() - d.at
        )));
    }
    Ok(index)
}

pub fn save_index(index: &LshIndex, path: &Path) -> Result<()> {
    fs::write(path, encode_index(index)).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path) -> Result<LshIndex> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes)
}
