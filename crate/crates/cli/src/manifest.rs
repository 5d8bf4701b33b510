//! The reproducibility record written next to every run's outputs.

use serde::{Deserialize, Serialize};
use steermetrics::metrics::AlphaEstimate;

use crate::RunConfig;

/// One input file and the SHA-256 of its bytes, hex-encoded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Artifact counts; each must match the corresponding emitted file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunCounts {
    /// Assembled drives (contiguous steering segments across all inputs).
    pub drives: usize,
    /// Lines in `interactions.jsonl`.
    pub interaction_sequences: usize,
    /// Lines in `baselines.jsonl`.
    pub baseline_sequences: usize,
    /// Baselines the stratification plan wanted but eligibility could not
    /// supply; `null` when this run read sequences from files instead of
    /// sampling them.
    pub baseline_shortfall: Option<usize>,
}

/// `manifest.json`: everything needed to audit or reproduce a run. A
/// re-run with the same inputs, config, and seed produces a byte-identical
/// manifest; wall-clock timings live in `timings.json` for that reason.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    /// Inputs sorted by path.
    pub inputs: Vec<InputDigest>,
    pub counts: RunCounts,
    /// The entropy bin scale; `null` until a report stage estimates it.
    pub alpha: Option<AlphaEstimate>,
}

impl RunManifest {
    pub fn new(config: &RunConfig, inputs: Vec<InputDigest>, counts: RunCounts) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            inputs,
            counts,
            alpha: None,
        }
    }
}

/// Wall-clock stage durations, recorded in execution order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

impl StageTimings {
    pub fn record(&mut self, name: &str, elapsed: std::time::Duration) {
        self.stages.push(Stage { name: name.to_string(), seconds: elapsed.as_secs_f64() });
    }
}

/// Hex-encoded SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}
