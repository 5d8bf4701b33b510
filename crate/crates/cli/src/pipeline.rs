//! Orchestration stages shared by the subcommands: input discovery,
//! corpus loading, sequence extraction, and metric/report computation.
//! All parallel fan-outs collect in input order, so every stage is
//! deterministic for a fixed (inputs, config, seed) triple regardless of
//! thread count.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rayon::prelude::*;

use steermetrics::ingest::{assemble_drives, read_drive_log, IngestOptions, LogFormat};
use steermetrics::metrics::{
    compute_sequence_metrics, estimate_alpha, taylor_residuals, window_samples, AlphaEstimate,
    MetricsError, ResidualSeries, SequenceMetrics,
};
use steermetrics::model::{Drive, Sequence, SequenceRecord};
use steermetrics::sequencer::{
    extract_interaction_sequences, filter_adas_active, sample_baselines, BaselineSample,
};

use crate::manifest::{sha256_hex, InputDigest, StageTimings};
use crate::{CliError, CliResult, RunConfig};

/// Expands `--input` arguments — plain files, directories (scanned for
/// `.jsonl`/`.csv`), or glob patterns — into a sorted, deduplicated file
/// list. An argument that matches nothing fails the run: a typo'd input
/// silently narrowing the corpus would corrupt the analysis.
pub fn expand_inputs(patterns: &[String]) -> CliResult<Vec<PathBuf>> {
    let mut files: BTreeSet<PathBuf> = BTreeSet::new();
    for pattern in patterns {
        let path = Path::new(pattern);
        if path.is_file() {
            files.insert(path.to_path_buf());
            continue;
        }
        if path.is_dir() {
            let entries = std::fs::read_dir(path)
                .map_err(|e| CliError::data(anyhow!("reading directory {pattern}: {e}")))?;
            let mut found = false;
            for entry in entries {
                let entry =
                    entry.map_err(|e| CliError::data(anyhow!("reading directory {pattern}: {e}")))?;
                let p = entry.path();
                let is_log = matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("jsonl") | Some("csv")
                );
                if is_log && p.is_file() {
                    files.insert(p);
                    found = true;
                }
            }
            if !found {
                return Err(CliError::data(anyhow!(
                    "directory {pattern} holds no .jsonl or .csv drive logs"
                )));
            }
            continue;
        }
        let matches = glob::glob(pattern)
            .map_err(|e| CliError::config(anyhow!("bad --input pattern `{pattern}`: {e}")))?;
        let mut found = false;
        for m in matches {
            let p = m.map_err(|e| CliError::data(anyhow!("scanning `{pattern}`: {e}")))?;
            if p.is_file() {
                files.insert(p);
                found = true;
            }
        }
        if !found {
            return Err(CliError::data(anyhow!("--input `{pattern}` matched no files")));
        }
    }
    if files.is_empty() {
        return Err(CliError::data(anyhow!("no input files given")));
    }
    Ok(files.into_iter().collect())
}

/// Everything loaded from the input logs, plus bookkeeping for warnings
/// and the manifest.
pub struct LoadedCorpus {
    /// All assembled drives, in (file, segment) order.
    pub drives: Vec<Drive>,
    /// One digest per input file, in the same sorted order as the files.
    pub inputs: Vec<InputDigest>,
    /// Malformed log lines skipped across all inputs.
    pub rejected_lines: usize,
    /// Drive-level contract violations noted during assembly.
    pub violations: Vec<String>,
    /// UI events that fell into steering outages and belong to no drive.
    pub dropped_ui_events: usize,
    /// Files contributing no drive at all (e.g. no steering records).
    pub skipped_files: Vec<String>,
}

/// Reads, hashes, parses, and assembles every input file in parallel,
/// merging in file order. A file without a single steering record is
/// skipped with a note — the caller decides whether an empty *corpus* is
/// fatal — but I/O and format errors abort immediately.
pub fn load_corpus(files: &[PathBuf], opts: &IngestOptions) -> CliResult<LoadedCorpus> {
    struct FileLoad {
        digest: InputDigest,
        drives: Vec<Drive>,
        rejected: usize,
        violations: Vec<String>,
        dropped_ui_events: usize,
        skipped: Option<String>,
    }

    let loads: Vec<CliResult<FileLoad>> = files
        .par_iter()
        .map(|path| {
            let shown = path.display().to_string();
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::data(anyhow!("reading {shown}: {e}")))?;
            let digest = InputDigest { path: shown.clone(), sha256: sha256_hex(&bytes) };
            let format = LogFormat::from_path(path)
                .map_err(|e| CliError::data(anyhow!("input {shown}: {e}")))?;
            let parsed = read_drive_log(bytes.as_slice(), format)
                .map_err(|e| CliError::data(anyhow!("parsing {shown}: {e}")))?;
            let rejected = parsed.rejects.len();
            for r in &parsed.rejects {
                eprintln!("warning: {shown}:{}: {}", r.line, r.reason);
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| shown.clone());
            match assemble_drives(parsed.records, &stem, opts) {
                Ok(assembly) => Ok(FileLoad {
                    digest,
                    drives: assembly.drives,
                    rejected,
                    violations: assembly
                        .violations
                        .iter()
                        .map(|v| format!("{}: {:?}", v.drive_id, v.violation))
                        .collect(),
                    dropped_ui_events: assembly.dropped_ui_events,
                    skipped: None,
                }),
                Err(steermetrics::ingest::IngestError::EmptyDrive(_)) => Ok(FileLoad {
                    digest,
                    drives: Vec::new(),
                    rejected,
                    violations: Vec::new(),
                    dropped_ui_events: 0,
                    skipped: Some(format!("{shown}: no steering records, skipped")),
                }),
                Err(e) => Err(CliError::data(anyhow!("assembling {shown}: {e}"))),
            }
        })
        .collect();

    let mut corpus = LoadedCorpus {
        drives: Vec::new(),
        inputs: Vec::with_capacity(files.len()),
        rejected_lines: 0,
        violations: Vec::new(),
        dropped_ui_events: 0,
        skipped_files: Vec::new(),
    };
    for load in loads {
        let load = load?;
        corpus.inputs.push(load.digest);
        corpus.drives.extend(load.drives);
        corpus.rejected_lines += load.rejected;
        corpus.violations.extend(load.violations);
        corpus.dropped_ui_events += load.dropped_ui_events;
        corpus.skipped_files.extend(load.skipped);
    }
    Ok(corpus)
}

/// Output of the extraction stage: the corpus plus both sequence sets.
pub struct Extraction {
    pub corpus: LoadedCorpus,
    pub interactions: Vec<Sequence>,
    pub baselines: BaselineSample,
}

/// Ingests the inputs, extracts interaction sequences (dropping those
/// touching active assistance), and samples duration-matched baselines.
/// Fails with exit 1 when no valid drive or no interaction sequence comes
/// out — there is nothing to analyze.
pub fn run_extraction(
    files: &[PathBuf],
    cfg: &RunConfig,
    timings: &mut StageTimings,
) -> CliResult<Extraction> {
    let t = std::time::Instant::now();
    let corpus = load_corpus(files, &cfg.ingest)?;
    timings.record("ingest", t.elapsed());
    for note in &corpus.skipped_files {
        eprintln!("warning: {note}");
    }
    for v in &corpus.violations {
        eprintln!("warning: drive contract violation: {v}");
    }
    if corpus.drives.is_empty() {
        return Err(CliError::data(anyhow!(
            "no valid drives in {} input file(s)",
            files.len()
        )));
    }

    let t = std::time::Instant::now();
    let per_drive: Vec<Vec<Sequence>> = corpus
        .drives
        .par_iter()
        .map(|d| filter_adas_active(extract_interaction_sequences(d, &cfg.pipeline), &d.adas))
        .collect();
    let interactions: Vec<Sequence> = per_drive.into_iter().flatten().collect();
    timings.record("sequences", t.elapsed());
    if interactions.is_empty() {
        return Err(CliError::data(anyhow!(
            "0 interaction sequences extracted from {} drive(s); nothing to compare",
            corpus.drives.len()
        )));
    }

    let t = std::time::Instant::now();
    let baselines = sample_baselines(&corpus.drives, &interactions, &cfg.pipeline);
    timings.record("baselines", t.elapsed());
    for s in &baselines.shortfalls {
        let (lo, hi) = baselines.plan.bin_bounds(s.bin_index);
        eprintln!(
            "warning: baseline shortfall in duration bin {} [{lo:.2} s, {hi:.2} s]: \
             sampled {} of {}",
            s.bin_index, s.sampled, s.target
        );
    }

    Ok(Extraction { corpus, interactions, baselines })
}

/// Serializes sequences as JSONL, one wire record per line.
pub fn sequences_to_jsonl(sequences: &[Sequence]) -> String {
    let mut out = String::new();
    for s in sequences {
        out.push_str(&serde_json::to_string(&s.record()).expect("JSON-safe record"));
        out.push('\n');
    }
    out
}

/// Reads a JSONL sequence file back into wire records.
pub fn read_sequence_records(path: &Path) -> CliResult<Vec<SequenceRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(anyhow!("reading {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SequenceRecord = serde_json::from_str(line).map_err(|e| {
            CliError::data(anyhow!("{}:{}: bad sequence record: {e}", path.display(), i + 1))
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Sequences re-attached to the drives they reference, ready for metric
/// computation.
pub struct AttachedSequences {
    /// `(drive index, sequence)` pairs, in record order.
    pub items: Vec<(usize, Sequence)>,
}

/// Re-attaches sequence records to their drives. A record naming an
/// unknown drive is a data error: the sequences and the telemetry fed to
/// `report` must come from the same corpus.
pub fn attach_records(
    records: &[SequenceRecord],
    drives: &[Drive],
) -> CliResult<AttachedSequences> {
    let by_id: HashMap<&str, usize> =
        drives.iter().enumerate().map(|(i, d)| (d.drive_id.as_str(), i)).collect();
    let mut items = Vec::with_capacity(records.len());
    for rec in records {
        let &idx = by_id.get(rec.drive_id.as_str()).ok_or_else(|| {
            CliError::data(anyhow!(
                "sequence references drive `{}` which is not among the inputs",
                rec.drive_id
            ))
        })?;
        items.push((idx, rec.attach(&drives[idx])));
    }
    Ok(AttachedSequences { items })
}

/// Estimates the entropy bin scale α from the baseline sequences'
/// prediction residuals. Windows too short to yield residuals are skipped
/// with a warning; a degenerate α (all residuals zero) is a validation
/// failure (exit 2), and an empty baseline set a data failure (exit 1).
pub fn alpha_from_baselines(
    baselines: &AttachedSequences,
    drives: &[Drive],
    percentile: f64,
) -> CliResult<AlphaEstimate> {
    let mut series: Vec<ResidualSeries> = Vec::with_capacity(baselines.items.len());
    let mut skipped = 0usize;
    for (idx, seq) in &baselines.items {
        let drive = &drives[*idx];
        let theta = match window_samples(&drive.steering, seq.window_start, seq.window_end) {
            Ok(theta) if theta.len() >= 4 => theta,
            _ => {
                skipped += 1;
                continue;
            }
        };
        match taylor_residuals(theta) {
            Ok(r) => series.push(r),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("warning: {skipped} baseline window(s) too short for residuals, skipped");
    }
    match estimate_alpha(&series, percentile) {
        Ok(alpha) => Ok(alpha),
        Err(e @ MetricsError::DegenerateBaseline) => Err(CliError::config(anyhow!(
            "{e}: baseline steering is exactly constant, so entropy bins cannot be scaled"
        ))),
        Err(e @ MetricsError::EmptyBaseline) => Err(CliError::data(anyhow!(
            "{e}: no usable baseline sequences"
        ))),
        Err(e) => Err(CliError::config(anyhow::Error::from(e))),
    }
}

/// Computes per-sequence metrics in parallel, preserving input order.
/// Sequences that fail (window too short after clipping, say) are dropped
/// with a warning count rather than failing the batch.
pub fn compute_metrics(
    group: &AttachedSequences,
    drives: &[Drive],
    alpha: &AlphaEstimate,
    cfg: &RunConfig,
) -> Vec<SequenceMetrics> {
    let results: Vec<Result<SequenceMetrics, MetricsError>> = group
        .items
        .par_iter()
        .map(|(idx, seq)| compute_sequence_metrics(&drives[*idx], seq, alpha, &cfg.pipeline))
        .collect();
    let mut metrics = Vec::with_capacity(results.len());
    let mut dropped = 0usize;
    for r in results {
        match r {
            Ok(m) => metrics.push(m),
            Err(_) => dropped += 1,
        }
    }
    if dropped > 0 {
        eprintln!("warning: {dropped} sequence(s) dropped during metric computation");
    }
    metrics
}

/// Serializes per-sequence metrics as JSONL.
pub fn metrics_to_jsonl(metrics: &[SequenceMetrics]) -> String {
    let mut out = String::new();
    for m in metrics {
        out.push_str(&serde_json::to_string(m).expect("JSON-safe metrics"));
        out.push('\n');
    }
    out
}
