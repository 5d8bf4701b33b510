//! Batch front end for the steermetrics pipeline.
//!
//! Three subcommands cover the workflow end to end:
//!
//! * `synth` — generate a seeded synthetic drive corpus with ground-truth
//!   distraction episodes,
//! * `extract` — ingest drive logs, extract touchscreen-interaction
//!   sequences, and sample duration-matched baseline sequences,
//! * `report` — compute per-sequence steering metrics and the
//!   speed-bucketed, curvature-split effect-size report
//!   (`report --all` runs extract + report in one pass).
//!
//! Every run is a pure function of (inputs, config, seed): parallel stages
//! merge in a fixed order, so re-running a command writes byte-identical
//! manifests, sequence files, and reports. Wall-clock stage timings go to
//! a separate `timings.json` so they never perturb the comparable outputs.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use steermetrics::ingest::IngestOptions;
use steermetrics::model::PipelineConfig;

pub mod commands;
pub mod manifest;
pub mod pipeline;

/// Exit codes: `0` success, `1` I/O or data failure, `2` configuration or
/// validation failure.
pub const EXIT_DATA: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// An error carrying the process exit code it should map to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub source: anyhow::Error,
}

impl CliError {
    /// I/O trouble or data that cannot support the run (exit 1).
    pub fn data(source: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_DATA, source: source.into() }
    }

    /// Configuration rejected by validation (exit 2).
    pub fn config(source: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_CONFIG, source: source.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `{:#}` flattens the anyhow context chain onto one line.
        write!(f, "{:#}", self.source)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// The `--config` file for `extract`/`report`: pipeline parameters and
/// ingest knobs in one flat JSON object. Missing fields take their
/// defaults, so `{}` (or no config file at all) runs the reference setup.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    #[serde(flatten)]
    pub ingest: IngestOptions,
}

impl RunConfig {
    /// Field-naming validation across both halves.
    pub fn validate(&self) -> CliResult<()> {
        self.pipeline.validate().map_err(CliError::config)?;
        let r = self.ingest.nominal_rate;
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::config(anyhow::anyhow!(
                "invalid config: `nominal_rate` must be a positive finite rate in Hz, got {r}"
            )));
        }
        let g = self.ingest.max_gap;
        if !(g > 0.0 && g.is_finite()) {
            return Err(CliError::config(anyhow::anyhow!(
                "invalid config: `max_gap` must be a positive finite number of seconds, got {g}"
            )));
        }
        Ok(())
    }
}

/// Loads the run configuration, applies a `--seed` override, validates.
/// An unreadable file is an I/O failure (exit 1); unparseable or invalid
/// contents are configuration failures (exit 2).
pub fn load_run_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::data(anyhow::anyhow!("reading config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::config(anyhow::anyhow!("parsing config {}: {e}", p.display()))
            })?
        }
    };
    if let Some(s) = seed {
        cfg.pipeline.rng_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a value as indented JSON with a trailing newline — the house
/// style for every `.json` artifact.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON-safe value");
    s.push('\n');
    s
}

/// Writes bytes to `path`, mapping failures to exit-1 errors that name
/// the file.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::data(anyhow::anyhow!("writing {}: {e}", path.display())))
}
