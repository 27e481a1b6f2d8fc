//! Detector evaluation: per-document scores, ROC/AUC, timing and grid sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsh::{LshIndex, LshParams, VerifyMode};
use crate::synth::{Label, LabeledCorpus};
use crate::text::Document;

/// Which candidates contribute to a document's duplicate score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Only candidates that would be retained ahead of the document, i.e.
    /// with a smaller id. The copy kept by deduplication scores from its
    /// later copies not at all, matching which documents get removed.
    #[default]
    Removal,
    /// Every candidate. A source and its copy then score identically.
    Symmetric,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "removal" => Ok(ScoreMode::Removal),
            "symmetric" => Ok(ScoreMode::Symmetric),
            other => Err(Error::InvalidParameter(format!(
                "unknown score mode {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMode::Removal => "removal",
            ScoreMode::Symmetric => "symmetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub family_seed: u64,
    pub score_mode: ScoreMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            family_seed: 1,
            score_mode: ScoreMode::Removal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub params: LshParams,
    pub family_seed: u64,
    pub score_mode: ScoreMode,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub build_seconds: f64,
    pub scan_seconds: f64,
    pub doc_count: usize,
    pub duplicate_pairs_found: usize,
}

impl EvalReport {
    /// ROC as `fpr,tpr` lines with a header.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.roc {
            out.push_str(&format!("{},{}\n", p.fpr, p.tpr));
        }
        out
    }
}

/// Max verified similarity over a document's candidates, 0 without any.
pub fn score_documents(
    index: &LshIndex,
    corpus: &LabeledCorpus,
    mode: ScoreMode,
) -> Result<BTreeMap<String, f64>> {
    if index.len() != corpus.documents.len() {
        return Err(Error::Mismatch(format!(
            "index holds {} documents, corpus {}",
            index.len(),
            corpus.documents.len()
        )));
    }
    if let Some(missing) = corpus.documents.iter().find(|d| !index.contains(&d.id)) {
        return Err(Error::Mismatch(format!(
            "document {:?} is not indexed",
            missing.id
        )));
    }
    let ids = index.ids();
    let scores: Vec<(String, f64)> = (0..ids.len() as u32)
        .into_par_iter()
        .map(|i| {
            let own = &ids[i as usize];
            let best = index
                .candidate_positions(i)
                .into_iter()
                .filter(|&j| mode == ScoreMode::Symmetric || ids[j as usize] < *own)
                .map(|j| index.similarity_at(i, j))
                .fold(0.0f64, f64::max);
            (own.clone(), best)
        })
        .collect();
    Ok(scores.into_iter().collect())
}

/// ROC curve and trapezoidal AUC with duplicates as the positive class.
/// Documents with equal scores enter the curve as one block.
pub fn compute_roc_auc(
    scores: &BTreeMap<String, f64>,
    labels: &BTreeMap<String, Label>,
) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != labels.len() || scores.keys().any(|k| !labels.contains_key(k)) {
        return Err(Error::Mismatch(
            "scores and labels cover different documents".into(),
        ));
    }
    let mut items: Vec<(f64, bool)> = scores
        .iter()
        .map(|(id, &s)| (s, labels[id] == Label::Duplicate))
        .collect();
    roc_auc(&mut items)
}

/// Same as [`compute_roc_auc`] over `(score, is_positive)` items.
pub fn roc_auc(items: &mut [(f64, bool)]) -> Result<(Vec<RocPoint>, f64)> {
    if let Some((s, _)) = items.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidParameter(format!(
            "score {s} is not a number"
        )));
    }
    let positives = items.iter().filter(|(_, p)| *p).count();
    let negatives = items.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass(format!(
            "{positives} positives, {negatives} negatives"
        )));
    }
    items.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut roc = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut start = 0;
    while start < items.len() {
        let score = items[start].0;
        let mut end = start;
        while end < items.len() && items[end].0 == score {
            if items[end].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        let prev = *roc.last().expect("non-empty");
        let point = RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        roc.push(point);
        start = end;
    }
    Ok((roc, auc))
}

/// Builds the index, scores every document and runs the dedup scan.
pub fn evaluate(
    corpus: &LabeledCorpus,
    params: LshParams,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    params.validate()?;
    let build_start = Instant::now();
    let index = LshIndex::build(params, opts.family_seed, &corpus.documents)?;
    let build_seconds = build_start.elapsed().as_secs_f64();

    let scan_start = Instant::now();
    let scores = score_documents(&index, corpus, opts.score_mode)?;
    let scan = index.dedup_scan();
    let scan_seconds = scan_start.elapsed().as_secs_f64();

    let (roc, auc) = compute_roc_auc(&scores, &corpus.labels)?;
    Ok(EvalReport {
        params,
        family_seed: opts.family_seed,
        score_mode: opts.score_mode,
        auc,
        roc,
        build_seconds,
        scan_seconds,
        doc_count: index.len(),
        duplicate_pairs_found: scan.pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub permutation_values: Vec<usize>,
    pub ngram_values: Vec<usize>,
    pub threshold_values: Vec<f64>,
    pub verify_mode: VerifyMode,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            permutation_values: vec![64, 128],
            ngram_values: vec![12, 16],
            threshold_values: vec![0.65, 0.75, 0.80],
            verify_mode: VerifyMode::Exact,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        fn distinct<T: PartialEq>(v: &[T]) -> bool {
            v.iter().enumerate().all(|(i, x)| !v[..i].contains(x))
        }
        if self.permutation_values.is_empty()
            || self.ngram_values.is_empty()
            || self.threshold_values.is_empty()
        {
            return Err(Error::InvalidParameter(
                "sweep grid lists must be non-empty".into(),
            ));
        }
        if !distinct(&self.permutation_values)
            || !distinct(&self.ngram_values)
            || !distinct(&self.threshold_values)
        {
            return Err(Error::InvalidParameter(
                "sweep grid lists must not repeat values".into(),
            ));
        }
        Ok(())
    }

    /// `(k, n, threshold)` cells, permutations outermost.
    pub fn cells(&self) -> Vec<(usize, usize, f64)> {
        let mut cells = Vec::new();
        for &k in &self.permutation_values {
            for &n in &self.ngram_values {
                for &t in &self.threshold_values {
                    cells.push((k, n, t));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Position in grid order.
    pub grid_index: usize,
    pub k: usize,
    pub n: usize,
    pub threshold: f64,
    /// One of the three best AUCs.
    pub top: bool,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Evaluates every grid cell in grid order. Cells come back sorted by
/// descending AUC (grid order among equals), failed cells last.
pub fn sweep(
    corpus: &LabeledCorpus,
    grid: &SweepGrid,
    opts: &EvalOptions,
) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let mut cells: Vec<SweepCell> = grid
        .cells()
        .into_iter()
        .enumerate()
        .map(|(grid_index, (k, n, threshold))| {
            let outcome = LshParams::new(k, n, threshold, grid.verify_mode)
                .and_then(|params| evaluate(corpus, params, opts));
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    log::warn!("sweep cell k={k} n={n} t={threshold} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            SweepCell {
                grid_index,
                k,
                n,
                threshold,
                top: false,
                report,
                error,
            }
        })
        .collect();
    let auc = |c: &SweepCell| c.report.as_ref().map(|r| r.auc);
    cells.sort_by(|a, b| match (auc(a), auc(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.grid_index.cmp(&b.grid_index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.grid_index.cmp(&b.grid_index),
    });
    for cell in cells.iter_mut().filter(|c| c.report.is_some()).take(3) {
        cell.top = true;
    }
    Ok(cells)
}

/// Share of documents that deduplication would remove.
pub fn duplication_percentage(
    corpus: &[Document],
    params: LshParams,
    family_seed: u64,
) -> Result<f64> {
    let index = LshIndex::build(params, family_seed, corpus)?;
    if index.is_empty() {
        return Ok(0.0);
    }
    let scan = index.dedup_scan();
    Ok(scan.removable_count() as f64 / index.len() as f64)
}
