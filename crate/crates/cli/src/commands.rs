//! The three subcommands. Each returns `Ok(())` for exit 0 or a
//! `CliError` carrying the exit code.

use std::path::Path;
use std::time::Instant;

use anyhow::anyhow;

use steermetrics::ingest::{drive_to_records, write_records_jsonl};
use steermetrics::model::SequenceKind;
use steermetrics::stats::{build_report, plot_series_csv, report_to_csv};
use steermetrics::synth::{generate_corpus, CorpusConfig};

use crate::manifest::{RunCounts, RunManifest, StageTimings};
use crate::pipeline::{
    alpha_from_baselines, attach_records, compute_metrics, expand_inputs, load_corpus,
    metrics_to_jsonl, read_sequence_records, run_extraction, sequences_to_jsonl,
    AttachedSequences, Extraction,
};
use crate::{load_run_config, to_pretty_json, write_file, CliError, CliResult};

/// Which report table files `report` writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

impl ReportFormat {
    fn wants_csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }
    fn wants_json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }
}

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(anyhow!("creating output directory {}: {e}", out.display())))
}

/// `synth`: generate a seeded synthetic corpus. Writes one
/// `<drive_id>.jsonl` per drive plus `truth.json` with the ground-truth
/// distraction episodes.
pub fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut cfg: CorpusConfig = match config {
        None => CorpusConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::data(anyhow!("reading config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(anyhow!("parsing config {}: {e}", p.display())))?
        }
    };
    if let Some(s) = seed {
        cfg.drive.rng_seed = s;
    }
    if cfg.n_drives == 0 {
        return Err(CliError::config(anyhow!(
            "invalid config: `n_drives` must be at least 1"
        )));
    }
    let corpus = generate_corpus(&cfg, "drive").map_err(CliError::config)?;

    ensure_out_dir(out)?;
    let mut truths = Vec::with_capacity(corpus.len());
    for (drive, truth) in &corpus {
        let path = out.join(format!("{}.jsonl", drive.drive_id));
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &drive_to_records(drive))
            .expect("writing to a Vec cannot fail");
        write_file(&path, buf)?;
        truths.push(truth);
    }
    write_file(&out.join("truth.json"), to_pretty_json(&truths))?;
    println!("wrote {} synthetic drive log(s) to {}", corpus.len(), out.display());
    Ok(())
}

/// `extract`: ingest drive logs, extract interaction sequences, sample
/// baselines, and write both sequence sets plus the run manifest.
pub fn cmd_extract(
    inputs: &[String],
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> CliResult<()> {
    let cfg = load_run_config(config, seed)?;
    let files = expand_inputs(inputs)?;
    let mut timings = StageTimings::default();

    let extraction = run_extraction(&files, &cfg, &mut timings)?;

    let t = Instant::now();
    ensure_out_dir(out)?;
    write_extraction_outputs(&extraction, &cfg, out)?;
    timings.record("write", t.elapsed());
    write_file(&out.join("timings.json"), to_pretty_json(&timings))?;

    println!(
        "{} interaction sequences extracted ({} duration-matched baselines) from {} drive(s)",
        extraction.interactions.len(),
        extraction.baselines.sequences.len(),
        extraction.corpus.drives.len()
    );
    Ok(())
}

/// Writes `interactions.jsonl`, `baselines.jsonl`, and `manifest.json`
/// (α still null at this stage), returning the manifest for reuse.
fn write_extraction_outputs(
    extraction: &Extraction,
    cfg: &crate::RunConfig,
    out: &Path,
) -> CliResult<RunManifest> {
    write_file(
        &out.join("interactions.jsonl"),
        sequences_to_jsonl(&extraction.interactions),
    )?;
    write_file(
        &out.join("baselines.jsonl"),
        sequences_to_jsonl(&extraction.baselines.sequences),
    )?;
    let shortfall: usize =
        extraction.baselines.shortfalls.iter().map(|s| s.target - s.sampled).sum();
    let manifest = RunManifest::new(
        cfg,
        extraction.corpus.inputs.clone(),
        RunCounts {
            drives: extraction.corpus.drives.len(),
            interaction_sequences: extraction.interactions.len(),
            baseline_sequences: extraction.baselines.sequences.len(),
            baseline_shortfall: Some(shortfall),
        },
    );
    write_file(&out.join("manifest.json"), to_pretty_json(&manifest))?;
    Ok(manifest)
}

/// `report`: estimate α from the baselines, compute per-sequence metrics
/// for both groups, and write the metrics, the bucketed comparison report,
/// and the plot series. With `--all` the extraction stage runs first and
/// its artifacts are written alongside.
#[allow(clippy::too_many_arguments)]
pub fn cmd_report(
    inputs: &[String],
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    sequences_dir: Option<&Path>,
    all: bool,
    format: ReportFormat,
) -> CliResult<()> {
    let cfg = load_run_config(config, seed)?;
    let files = expand_inputs(inputs)?;
    let mut timings = StageTimings::default();

    // Stage 1: obtain drives + both sequence sets, either by running
    // extraction here (--all) or by reading a previous run's files.
    let t = Instant::now();
    let (drives, interactions, baselines, mut manifest) = if all {
        let extraction = run_extraction(&files, &cfg, &mut timings)?;
        ensure_out_dir(out)?;
        let manifest = write_extraction_outputs(&extraction, &cfg, out)?;
        let interactions = AttachedSequences {
            items: index_sequences(&extraction)?,
        };
        let baselines = AttachedSequences {
            items: index_baselines(&extraction)?,
        };
        (extraction.corpus.drives, interactions, baselines, manifest)
    } else {
        let seq_dir = sequences_dir.unwrap_or(out);
        let inter_path = seq_dir.join("interactions.jsonl");
        let base_path = seq_dir.join("baselines.jsonl");
        for p in [&inter_path, &base_path] {
            if !p.is_file() {
                return Err(CliError::data(anyhow!(
                    "missing {} — run `extract` first or pass --all",
                    p.display()
                )));
            }
        }
        let corpus = load_corpus(&files, &cfg.ingest)?;
        if corpus.drives.is_empty() {
            return Err(CliError::data(anyhow!(
                "no valid drives in {} input file(s)",
                files.len()
            )));
        }
        let inter_records = read_sequence_records(&inter_path)?;
        let base_records = read_sequence_records(&base_path)?;
        if base_records.is_empty() {
            return Err(CliError::data(anyhow!(
                "{} holds no baseline sequences",
                base_path.display()
            )));
        }
        check_kinds(&inter_records, SequenceKind::Interaction, &inter_path)?;
        check_kinds(&base_records, SequenceKind::Baseline, &base_path)?;
        let interactions = attach_records(&inter_records, &corpus.drives)?;
        let baselines = attach_records(&base_records, &corpus.drives)?;
        timings.record("load", t.elapsed());
        ensure_out_dir(out)?;
        let manifest = RunManifest::new(
            &cfg,
            corpus.inputs.clone(),
            RunCounts {
                drives: corpus.drives.len(),
                interaction_sequences: interactions.items.len(),
                baseline_sequences: baselines.items.len(),
                baseline_shortfall: None,
            },
        );
        (corpus.drives, interactions, baselines, manifest)
    };

    // Stage 2: α from baseline residuals.
    let t = Instant::now();
    let alpha = alpha_from_baselines(&baselines, &drives, cfg.pipeline.alpha_percentile)?;
    timings.record("alpha", t.elapsed());

    // Stage 3: per-sequence metrics, both groups.
    let t = Instant::now();
    let interaction_metrics = compute_metrics(&interactions, &drives, &alpha, &cfg);
    let baseline_metrics = compute_metrics(&baselines, &drives, &alpha, &cfg);
    timings.record("metrics", t.elapsed());

    // Stage 4: the comparison report and all output files.
    let t = Instant::now();
    let report = build_report(&interaction_metrics, &baseline_metrics, &cfg.pipeline);
    write_file(
        &out.join("metrics_interaction.jsonl"),
        metrics_to_jsonl(&interaction_metrics),
    )?;
    write_file(&out.join("metrics_baseline.jsonl"), metrics_to_jsonl(&baseline_metrics))?;
    if format.wants_csv() {
        write_file(&out.join("report.csv"), report_to_csv(&report))?;
    }
    if format.wants_json() {
        write_file(&out.join("report.json"), to_pretty_json(&report))?;
    }
    for (label, csv) in plot_series_csv(&report) {
        write_file(&out.join(format!("plot_{label}.csv")), csv)?;
    }
    manifest.alpha = Some(alpha.clone());
    write_file(&out.join("manifest.json"), to_pretty_json(&manifest))?;
    timings.record("report", t.elapsed());
    write_file(&out.join("timings.json"), to_pretty_json(&timings))?;

    println!(
        "alpha = {:.6} deg (from {} baseline sequences)",
        alpha.alpha, alpha.n_baseline_sequences
    );
    for es in &report.effect_sizes {
        println!(
            "d[{}, {}] = {:+.4} (n = {} vs {})",
            es.metric, es.condition, es.d, es.n_interaction, es.n_baseline
        );
    }
    Ok(())
}

/// Pairs each extracted interaction sequence with its drive's index.
fn index_sequences(extraction: &Extraction) -> CliResult<Vec<(usize, steermetrics::Sequence)>> {
    pair_with_drives(&extraction.interactions, extraction)
}

fn index_baselines(extraction: &Extraction) -> CliResult<Vec<(usize, steermetrics::Sequence)>> {
    pair_with_drives(&extraction.baselines.sequences, extraction)
}

fn pair_with_drives(
    sequences: &[steermetrics::Sequence],
    extraction: &Extraction,
) -> CliResult<Vec<(usize, steermetrics::Sequence)>> {
    let by_id: std::collections::HashMap<&str, usize> = extraction
        .corpus
        .drives
        .iter()
        .enumerate()
        .map(|(i, d)| (d.drive_id.as_str(), i))
        .collect();
    sequences
        .iter()
        .map(|s| {
            by_id
                .get(s.drive_id.as_str())
                .map(|&i| (i, s.clone()))
                .ok_or_else(|| {
                    CliError::data(anyhow!("sequence names unknown drive `{}`", s.drive_id))
                })
        })
        .collect()
}

fn check_kinds(
    records: &[steermetrics::model::SequenceRecord],
    expect: SequenceKind,
    path: &Path,
) -> CliResult<()> {
    if let Some(bad) = records.iter().find(|r| r.kind != expect) {
        return Err(CliError::data(anyhow!(
            "{}: sequence of kind `{:?}` does not belong in this file (drive `{}`)",
            path.display(),
            bad.kind,
            bad.drive_id
        )));
    }
    Ok(())
}
