//! Batch front end for the dedupkit library.
//!
//! Every artifact-producing command writes a [`RunManifest`] next to its
//! primary output. The manifest stores the normalized argv, so a run can be
//! replayed with `dedupkit replay --manifest <path>`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dedupkit::eval::{self, EvalOptions, ScoreMode, SweepGrid};
use dedupkit::io::{self, CorpusSource};
use dedupkit::lsh::{LshIndex, LshParams, VerifyMode};
use dedupkit::synth::{self, ResemblanceMetric, SynthConfig};
use dedupkit::textgen;
use dedupkit::Document;

pub const TOOL_VERSION: &str = concat!("dedupkit ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "dedupkit",
    version,
    about = "MinHash LSH near-duplicate detection toolkit"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic article corpus as JSONL.
    Generate(GenerateArgs),
    /// Build a labeled near-duplicate benchmark from a corpus.
    Synth(SynthArgs),
    /// Build an LSH index and save it.
    Index(IndexArgs),
    /// Emit duplicate pairs and clusters.
    Dedup(DedupArgs),
    /// Score a labeled corpus and report ROC/AUC.
    Eval(EvalArgs),
    /// Evaluate a grid of parameters on a labeled corpus.
    Sweep(SweepArgs),
    /// Report the duplication percentage of a corpus.
    Report(ReportArgs),
    /// Re-execute the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LshArgs {
    /// Number of MinHash permutations.
    #[arg(long, default_value_t = 128)]
    pub perms: usize,
    /// Shingle size in characters.
    #[arg(long, default_value_t = 12)]
    pub ngram: usize,
    #[arg(long, default_value_t = 0.65)]
    pub threshold: f64,
    #[arg(long, default_value_t = VerifyMode::Exact)]
    pub verify: VerifyMode,
    /// Hash family seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl LshArgs {
    fn params(&self) -> anyhow::Result<LshParams> {
        Ok(LshParams::new(
            self.perms,
            self.ngram,
            self.threshold,
            self.verify,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub dup_fraction: f64,
    #[arg(long, default_value_t = 0.87)]
    pub res_low: f64,
    #[arg(long, default_value_t = 0.94)]
    pub res_high: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub donor_pool_size: usize,
    #[arg(long, default_value_t = 300)]
    pub donor_articles: usize,
    /// Resemblance measure: `words` or `chars:<n>`.
    #[arg(long, default_value = "words")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub lsh: LshArgs,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Saved index to scan.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub index: Option<PathBuf>,
    /// Corpus to index and scan.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub pairs_out: PathBuf,
    #[arg(long)]
    pub clusters_out: PathBuf,
    #[command(flatten)]
    pub lsh: LshArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub lsh: LshArgs,
    #[arg(long, default_value_t = ScoreMode::Removal)]
    pub score_mode: ScoreMode,
    #[arg(long)]
    pub report_out: PathBuf,
    #[arg(long)]
    pub roc_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "64,128")]
    pub perms_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "12,16")]
    pub ngram_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.65,0.75,0.8")]
    pub threshold_list: Vec<f64>,
    #[arg(long, default_value_t = VerifyMode::Exact)]
    pub verify: VerifyMode,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = ScoreMode::Removal)]
    pub score_mode: ScoreMode,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub lsh: LshArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Record of everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, with paths as given.
    pub argv: Vec<String>,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub tool_version: String,
    /// xxh3-64 of the input corpus, as 16 hex digits.
    pub input_digest: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, argv: &[String], config: Value) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            config,
            seeds: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_string(),
            input_digest: None,
            outputs: Vec::new(),
        }
    }

    fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    fn digest(mut self, docs: &[Document]) -> Self {
        self.input_digest = Some(format!("{:016x}", io::corpus_digest(docs)));
        self
    }

    fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn save(&self, path: &Path) -> anyhow::Result<()> {
        write_json(path, &serde_json::to_value(self)?)
    }
}

/// Manifest location for an output file: `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Parses and runs `argv` (without the program name). Returns the exit
/// status; failures print one JSON line to stderr.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(
        std::iter::once("dedupkit".to_string()).chain(argv.iter().cloned()),
    ) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            report_error("usage", first);
            return 2;
        }
    };
    match execute(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            // Library errors already carry their source in the message.
            match e.downcast_ref::<dedupkit::Error>() {
                Some(d) => report_error(d.kind(), &d.to_string()),
                None => report_error("error", &format!("{e:#}")),
            }
            1
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn execute(cli: Cli, argv: &[String]) -> anyhow::Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!(dedupkit::Error::InvalidParameter(
                "--workers must be positive".into()
            ));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build()?;
    pool.install(|| dispatch(cli.command, argv))
}

fn dispatch(command: Command, argv: &[String]) -> anyhow::Result<()> {
    match command {
        Command::Generate(a) => generate(a, argv),
        Command::Synth(a) => run_synth(a, argv),
        Command::Index(a) => run_index(a, argv),
        Command::Dedup(a) => run_dedup(a, argv),
        Command::Eval(a) => run_eval(a, argv),
        Command::Sweep(a) => run_sweep(a, argv),
        Command::Report(a) => run_report(a, argv),
        Command::Replay(a) => {
            let manifest = RunManifest::load(&a.manifest)?;
            log::info!(
                "replaying {} from {}",
                manifest.command,
                a.manifest.display()
            );
            let cli = Cli::try_parse_from(
                std::iter::once("dedupkit".to_string()).chain(manifest.argv.iter().cloned()),
            )?;
            if let Command::Replay(_) = cli.command {
                bail!(dedupkit::Error::InvalidParameter(
                    "a manifest cannot replay another replay".into()
                ));
            }
            dispatch(cli.command, &manifest.argv)
        }
    }
}

fn ingest(path: &Path) -> anyhow::Result<Vec<Document>> {
    Ok(io::ingest(&CorpusSource::detect(path))?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn with_manifest(mut value: Value, manifest: &Path) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("manifest".into(), Value::String(file_name(manifest)));
    }
    value
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

fn parse_metric(value: &str) -> anyhow::Result<ResemblanceMetric> {
    match value.split_once(':') {
        None if value == "words" => Ok(ResemblanceMetric::WordSet),
        Some(("chars", n)) => Ok(ResemblanceMetric::CharShingles {
            n: n.parse()
                .with_context(|| format!("bad shingle size in metric '{value}'"))?,
        }),
        _ => bail!(dedupkit::Error::InvalidParameter(format!(
            "metric must be 'words' or 'chars:<n>', got '{value}'"
        ))),
    }
}

fn generate(a: GenerateArgs, argv: &[String]) -> anyhow::Result<()> {
    let docs = textgen::generate_corpus(a.count, a.seed);
    io::write_documents(&a.out, &docs)?;
    let manifest_file = manifest_path(&a.out);
    RunManifest::new("generate", argv, json!({ "count": a.count }))
        .seed("textgen", a.seed)
        .digest(&docs)
        .output(&a.out)
        .save(&manifest_file)
}

fn run_synth(a: SynthArgs, argv: &[String]) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        duplicate_fraction: a.dup_fraction,
        resemblance_low: a.res_low,
        resemblance_high: a.res_high,
        donor_pool_size: a.donor_pool_size,
        donor_article_count: a.donor_articles,
        rng_seed: a.seed,
        metric: parse_metric(&a.metric)?,
        ..SynthConfig::default()
    };
    cfg.validate()?;
    let docs = ingest(&a.input)?;
    let corpus = synth::synthesize(&docs, &cfg)?;
    io::write_labeled(&a.out, &corpus)?;
    let manifest_file = manifest_path(&a.out);
    RunManifest::new(
        "synth",
        argv,
        json!({ "synth": cfg, "donor_ids": corpus.donor_ids, "documents": corpus.documents.len() }),
    )
    .seed("synth", a.seed)
    .digest(&docs)
    .output(&a.out)
    .save(&manifest_file)
}

fn run_index(a: IndexArgs, argv: &[String]) -> anyhow::Result<()> {
    let params = a.lsh.params()?;
    let docs = ingest(&a.input)?;
    let index = LshIndex::build(params, a.lsh.seed, &docs)?;
    io::save_index(&index, &a.out)?;
    RunManifest::new(
        "index",
        argv,
        json!({ "lsh": params, "documents": docs.len() }),
    )
    .seed("family", a.lsh.seed)
    .digest(&docs)
    .output(&a.out)
    .save(&manifest_path(&a.out))
}

fn run_dedup(a: DedupArgs, argv: &[String]) -> anyhow::Result<()> {
    let (index, digest) = match (&a.index, &a.input) {
        (Some(path), _) => (io::load_index(path)?, None),
        (None, Some(path)) => {
            let docs = ingest(path)?;
            let index = LshIndex::build(a.lsh.params()?, a.lsh.seed, &docs)?;
            (index, Some(docs))
        }
        (None, None) => bail!(dedupkit::Error::InvalidParameter(
            "one of --index or --in is required".into()
        )),
    };
    let scan = index.dedup_scan();

    let mut tsv = String::from("id_a\tid_b\tsimilarity\n");
    for p in &scan.pairs {
        tsv.push_str(&format!("{}\t{}\t{:.6}\n", p.id_a, p.id_b, p.similarity));
    }
    write_text(&a.pairs_out, &tsv)?;

    let manifest_file = manifest_path(&a.pairs_out);
    let clusters = json!({
        "documents": index.len(),
        "pairs": scan.pairs.len(),
        "removable": scan.removable_count(),
        "clusters": scan.clusters,
    });
    write_json(&a.clusters_out, &with_manifest(clusters, &manifest_file))?;

    let mut manifest = RunManifest::new("dedup", argv, json!({ "lsh": index.params() }))
        .seed("family", index.family_seed())
        .output(&a.pairs_out)
        .output(&a.clusters_out);
    if let Some(docs) = digest {
        manifest = manifest.digest(&docs);
    } else if let Some(path) = &a.index {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        manifest.input_digest = Some(format!("{:016x}", index_checksum(&bytes)));
    }
    manifest.save(&manifest_file)
}

/// Index files end in an xxh3 checksum of their contents, so that serves
/// as the input digest.
fn index_checksum(bytes: &[u8]) -> u64 {
    let tail = &bytes[bytes.len().saturating_sub(8)..];
    let mut out = [0u8; 8];
    out[..tail.len()].copy_from_slice(tail);
    u64::from_le_bytes(out)
}

fn run_eval(a: EvalArgs, argv: &[String]) -> anyhow::Result<()> {
    let params = a.lsh.params()?;
    let corpus = io::read_labeled(&a.input)?;
    let opts = EvalOptions {
        family_seed: a.lsh.seed,
        score_mode: a.score_mode,
    };
    let report = eval::evaluate(&corpus, params, &opts)?;
    let manifest_file = manifest_path(&a.report_out);
    write_json(
        &a.report_out,
        &with_manifest(serde_json::to_value(&report)?, &manifest_file),
    )?;
    write_text(&a.roc_out, &report.roc_csv())?;
    RunManifest::new("eval", argv, json!({ "lsh": params, "options": opts }))
        .seed("family", a.lsh.seed)
        .digest(&corpus.documents)
        .output(&a.report_out)
        .output(&a.roc_out)
        .save(&manifest_file)
}

fn run_sweep(a: SweepArgs, argv: &[String]) -> anyhow::Result<()> {
    let grid = SweepGrid {
        permutation_values: a.perms_list,
        ngram_values: a.ngram_list,
        threshold_values: a.threshold_list,
        verify_mode: a.verify,
    };
    grid.validate()?;
    let corpus = io::read_labeled(&a.input)?;
    let opts = EvalOptions {
        family_seed: a.seed,
        score_mode: a.score_mode,
    };
    let cells = eval::sweep(&corpus, &grid, &opts)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let manifest_file = a.out_dir.join("manifest.json");
    let mut manifest = RunManifest::new("sweep", argv, json!({ "grid": grid, "options": opts }))
        .seed("family", a.seed)
        .digest(&corpus.documents);

    let mut table = String::from("rank\tk\tthreshold\tn\tauc\tbuild_seconds\tscan_seconds\ttop\n");
    let mut rows = Vec::new();
    for (rank, cell) in cells.iter().enumerate() {
        let cell_file = a.out_dir.join(format!("cell-{:03}.json", cell.grid_index));
        write_json(
            &cell_file,
            &with_manifest(serde_json::to_value(cell)?, &manifest_file),
        )?;
        manifest = manifest.output(&cell_file);
        let (auc, build, scan) = cell
            .report
            .as_ref()
            .map_or((f64::NAN, f64::NAN, f64::NAN), |r| {
                (r.auc, r.build_seconds, r.scan_seconds)
            });
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.3}\t{:.3}\t{}\n",
            rank + 1,
            cell.k,
            cell.threshold,
            cell.n,
            auc,
            build,
            scan,
            cell.top
        ));
        rows.push(json!({
            "rank": rank + 1,
            "grid_index": cell.grid_index,
            "k": cell.k,
            "threshold": cell.threshold,
            "n": cell.n,
            "auc": cell.report.as_ref().map(|r| r.auc),
            "top": cell.top,
            "error": cell.error,
        }));
    }
    let summary_json = a.out_dir.join("summary.json");
    let summary_tsv = a.out_dir.join("summary.tsv");
    write_json(
        &summary_json,
        &with_manifest(json!({ "cells": rows }), &manifest_file),
    )?;
    write_text(&summary_tsv, &table)?;
    manifest
        .output(&summary_json)
        .output(&summary_tsv)
        .save(&manifest_file)
}

fn run_report(a: ReportArgs, argv: &[String]) -> anyhow::Result<()> {
    let params = a.lsh.params()?;
    let docs = ingest(&a.input)?;
    let index = LshIndex::build(params, a.lsh.seed, &docs)?;
    let scan = index.dedup_scan();
    let removable = scan.removable_count();
    let percentage = if docs.is_empty() {
        0.0
    } else {
        removable as f64 / docs.len() as f64
    };
    let report = json!({
        "documents": docs.len(),
        "removable": removable,
        "clusters": scan.clusters.len(),
        "duplication_percentage": percentage,
        "params": params,
        "family_seed": a.lsh.seed,
    });
    match &a.out {
        Some(out) => {
            let manifest_file = manifest_path(out);
            write_json(out, &with_manifest(report, &manifest_file))?;
            RunManifest::new("report", argv, json!({ "lsh": params }))
                .seed("family", a.lsh.seed)
                .digest(&docs)
                .output(out)
                .save(&manifest_file)
        }
        None => {
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
    }
}
