//! Core telemetry types shared by every pipeline stage: uniform-grid traces,
//! interaction events, driver-assistance intervals, drives, extracted
//! sequences, and the pipeline configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A uniformly sampled time series. Timestamps are implicit: sample `i`
/// lives at `start_time + i / sample_rate` (index math, never cumulative
/// addition, so long traces do not accumulate rounding error).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformTrace {
    /// Time of the first sample, seconds (epoch or trip-relative).
    pub start_time: f64,
    /// Samples per second; 5 Hz for the fleet data this models.
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl UniformTrace {
    pub fn new(start_time: f64, sample_rate: f64, values: Vec<f64>) -> Self {
        Self { start_time, sample_rate, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Closed span `[first sample time, last sample time]`. Empty traces
    /// report a degenerate span at `start_time`.
    pub fn span(&self) -> (f64, f64) {
        if self.values.is_empty() {
            (self.start_time, self.start_time)
        } else {
            (self.start_time, self.time_at(self.values.len() - 1))
        }
    }
}

/// One touchscreen interaction event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UIEvent {
    /// Event time, seconds.
    pub t: f64,
    /// Identifier of the touched UI element.
    pub element: String,
    pub gesture: Gesture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gesture {
    Tap,
    Drag,
    Swipe,
    Other,
}

/// Driver-assistance features whose activity disqualifies steering data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdasFeature {
    CruiseControl,
    SteeringAssist,
}

/// Closed interval `[start, end]` during which an assistance feature was
/// active. Touching a window endpoint counts as overlap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdasInterval {
    pub feature: AdasFeature,
    pub start: f64,
    pub end: f64,
}

impl AdasInterval {
    /// Closed-interval overlap test against `[start, end]`.
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start <= end && start <= self.end
    }
}

/// One drive: aligned steering/speed traces plus the event and assistance
/// logs that fell inside the trace span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub drive_id: String,
    /// Steering wheel angle, degrees (sign convention free; metrics are
    /// sign- and offset-invariant).
    pub steering: UniformTrace,
    /// Vehicle speed, km/h, regularized onto the steering grid.
    pub speed: UniformTrace,
    /// Interaction events sorted by time.
    pub ui_events: Vec<UIEvent>,
    /// Normalized assistance intervals, per feature non-overlapping.
    pub adas: Vec<AdasInterval>,
}

impl Drive {
    /// Span jointly covered by steering and speed; sequence windows are
    /// clipped to this. Falls back to the steering span when speed is
    /// missing (the drive is then invalid, but still inspectable).
    pub fn span(&self) -> (f64, f64) {
        let (a0, a1) = self.steering.span();
        if self.speed.is_empty() {
            return (a0, a1);
        }
        let (b0, b1) = self.speed.span();
        (a0.max(b0), a1.min(b1))
    }
}

/// Whether a sequence covers touchscreen interaction or sampled baseline
/// driving.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Interaction,
    Baseline,
}

/// A core span of events (or sampled baseline core) plus the buffered
/// analysis window around it.
///
/// Invariants: `core_start <= core_end`; the window contains the core;
/// `window = core ± t_buffer` exactly unless `clipped` is set (window cut
/// at the drive span, or a matched baseline too short to carry full
/// buffers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub drive_id: String,
    pub kind: SequenceKind,
    pub core_start: f64,
    pub core_end: f64,
    pub window_start: f64,
    pub window_end: f64,
    /// Constituent events; empty for baselines.
    pub events: Vec<UIEvent>,
    pub clipped: bool,
}

impl Sequence {
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn core_duration(&self) -> f64 {
        self.core_end - self.core_start
    }

    /// Window length in seconds — the duration used for stratification and
    /// reported as the sequence duration.
    pub fn window_duration(&self) -> f64 {
        self.window_end - self.window_start
    }

    /// Wire form carrying the event count instead of the events.
    pub fn record(&self) -> SequenceRecord {
        SequenceRecord {
            drive_id: self.drive_id.clone(),
            kind: self.kind,
            core_start: self.core_start,
            core_end: self.core_end,
            window_start: self.window_start,
            window_end: self.window_end,
            n_events: self.events.len(),
            clipped: self.clipped,
        }
    }
}

/// JSONL-serializable sequence record. Events are not stored; they are
/// recovered from the owning drive (all events inside the core belong to
/// the sequence, since cores never overlap).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub drive_id: String,
    pub kind: SequenceKind,
    pub core_start: f64,
    pub core_end: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub n_events: usize,
    pub clipped: bool,
}

impl SequenceRecord {
    /// Rebuild the full sequence by re-attaching the drive's events that
    /// fall inside the core.
    pub fn attach(&self, drive: &Drive) -> Sequence {
        let events: Vec<UIEvent> = match self.kind {
            SequenceKind::Baseline => Vec::new(),
            SequenceKind::Interaction => drive
                .ui_events
                .iter()
                .filter(|e| e.t >= self.core_start && e.t <= self.core_end)
                .cloned()
                .collect(),
        };
        debug_assert!(
            self.kind == SequenceKind::Baseline || events.len() == self.n_events,
            "core [{}, {}] of {} holds {} events, record says {}",
            self.core_start,
            self.core_end,
            self.drive_id,
            events.len(),
            self.n_events
        );
        Sequence {
            drive_id: self.drive_id.clone(),
            kind: self.kind,
            core_start: self.core_start,
            core_end: self.core_end,
            window_start: self.window_start,
            window_end: self.window_end,
            events,
            clipped: self.clipped,
        }
    }
}

/// Tunable pipeline parameters. Defaults reproduce the reference setup:
/// 10 s gap threshold, 2 s window buffer, 0.90 residual percentile,
/// 1°/2°/5° reversal gaps, 0.6 Hz low-pass, 10°/20% curvature rule and
/// 30 km/h speed buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Events closer than this (strictly) join one sequence, seconds.
    pub t_max: f64,
    /// Window margin added on each side of a core, seconds.
    pub t_buffer: f64,
    /// Percentile of |residual| defining the entropy bin scale α.
    pub alpha_percentile: f64,
    /// Reversal gap thresholds, degrees, ascending.
    pub swrr_gaps: Vec<f64>,
    /// Zero-phase low-pass cutoff for reversal/curvature analysis, Hz.
    pub lowpass_cutoff: f64,
    /// |filtered angle| above this counts as curve steering, degrees.
    pub curvature_threshold: f64,
    /// Fraction of window samples above the threshold that makes the
    /// window "curved" (strictly greater).
    pub curvature_fraction: f64,
    /// Finite lower edges of the half-open speed buckets, km/h; the last
    /// bucket is open-ended above the final edge.
    pub speed_bucket_edges: Vec<f64>,
    /// Seed for baseline sampling.
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            t_buffer: 2.0,
            alpha_percentile: 0.90,
            swrr_gaps: vec![1.0, 2.0, 5.0],
            lowpass_cutoff: 0.6,
            curvature_threshold: 10.0,
            curvature_fraction: 0.2,
            speed_bucket_edges: vec![0.0, 30.0, 60.0, 90.0, 120.0],
            rng_seed: 0,
        }
    }
}

/// Configuration rejected at validation, naming the offending field.
#[derive(Debug, Error)]
#[error("invalid config: `{field}` {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

fn cfg_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError { field, reason: reason.into() }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(cfg_err("t_max", format!("must be a positive finite number of seconds, got {}", self.t_max)));
        }
        if !(self.t_buffer >= 0.0 && self.t_buffer.is_finite()) {
            return Err(cfg_err("t_buffer", format!("must be a non-negative finite number of seconds, got {}", self.t_buffer)));
        }
        if !(self.alpha_percentile > 0.0 && self.alpha_percentile < 1.0) {
            return Err(cfg_err("alpha_percentile", format!("must lie strictly between 0 and 1, got {}", self.alpha_percentile)));
        }
        if self.swrr_gaps.is_empty() {
            return Err(cfg_err("swrr_gaps", "must list at least one gap threshold".to_string()));
        }
        if self.swrr_gaps.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(cfg_err("swrr_gaps", "gap thresholds must be positive finite degrees".to_string()));
        }
        if self.swrr_gaps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("swrr_gaps", "gap thresholds must be strictly ascending".to_string()));
        }
        if !(self.lowpass_cutoff > 0.0 && self.lowpass_cutoff.is_finite()) {
            return Err(cfg_err("lowpass_cutoff", format!("must be a positive finite frequency in Hz, got {}", self.lowpass_cutoff)));
        }
        if !(self.curvature_threshold >= 0.0 && self.curvature_threshold.is_finite()) {
            return Err(cfg_err("curvature_threshold", format!("must be a non-negative finite angle in degrees, got {}", self.curvature_threshold)));
        }
        if !(self.curvature_fraction >= 0.0 && self.curvature_fraction <= 1.0) {
            return Err(cfg_err("curvature_fraction", format!("must lie in [0, 1], got {}", self.curvature_fraction)));
        }
        if self.speed_bucket_edges.is_empty() {
            return Err(cfg_err("speed_bucket_edges", "must list at least one finite edge".to_string()));
        }
        if self.speed_bucket_edges.iter().any(|e| !e.is_finite()) {
            return Err(cfg_err("speed_bucket_edges", "edges must be finite; the top bucket is implicitly open-ended".to_string()));
        }
        if self.speed_bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("speed_bucket_edges", "edges must be strictly ascending".to_string()));
        }
        Ok(())
    }
}

/// One failed drive-invariant check: the field, the rule it broke, and the
/// first offending index or time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    /// First offending sample index, event index, or timestamp.
    pub at: Option<String>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)?;
        if let Some(at) = &self.at {
            write!(f, " (at {at})")?;
        }
        Ok(())
    }
}

fn violation(field: &str, rule: &str, at: Option<String>) -> Violation {
    Violation { field: field.to_string(), rule: rule.to_string(), at }
}

fn check_trace(field: &str, trace: &UniformTrace, out: &mut Vec<Violation>) {
    if !(trace.sample_rate > 0.0 && trace.sample_rate.is_finite()) {
        out.push(violation(field, "sample_rate must be positive and finite", None));
    }
    if trace.values.is_empty() {
        out.push(violation(field, "values must be non-empty", None));
    }
    if let Some(i) = trace.values.iter().position(|v| !v.is_finite()) {
        out.push(violation(field, "values must all be finite", Some(format!("index {i}"))));
    }
    if !trace.start_time.is_finite() {
        out.push(violation(field, "start_time must be finite", None));
    }
}

/// Check every structural invariant of a drive, returning all violations
/// (empty means valid). Never panics on malformed input.
pub fn validate_drive(drive: &Drive) -> Vec<Violation> {
    let mut out = Vec::new();
    check_trace("steering", &drive.steering, &mut out);
    check_trace("speed", &drive.speed, &mut out);
    if let Some(i) = drive.speed.values.iter().position(|v| *v < 0.0) {
        out.push(violation("speed", "values must be non-negative", Some(format!("index {i}"))));
    }

    if !drive.steering.is_empty() && !drive.speed.is_empty() {
        let (s0, s1) = drive.steering.span();
        let (p0, p1) = drive.speed.span();
        if s0.max(p0) > s1.min(p1) {
            out.push(violation("speed", "steering and speed must cover a common span", None));
        }
    }

    let (span_start, span_end) = drive.span();
    for (i, pair) in drive.ui_events.windows(2).enumerate() {
        if pair[0].t > pair[1].t {
            out.push(violation("ui_events", "events must be sorted by time", Some(format!("index {}", i + 1))));
            break;
        }
    }
    if let Some(i) = drive.ui_events.iter().position(|e| e.element.is_empty()) {
        out.push(violation("ui_events", "element must be non-empty", Some(format!("index {i}"))));
    }
    if let Some(e) = drive.ui_events.iter().find(|e| e.t < span_start || e.t > span_end) {
        out.push(violation("ui_events", "event times must lie within the drive span", Some(format!("t={}", e.t))));
    }

    if let Some(iv) = drive.adas.iter().find(|iv| !(iv.start <= iv.end)) {
        out.push(violation("adas", "intervals must satisfy start <= end", Some(format!("start={}", iv.start))));
    }
    for feature in [AdasFeature::CruiseControl, AdasFeature::SteeringAssist] {
        let mut of_feature: Vec<&AdasInterval> =
            drive.adas.iter().filter(|iv| iv.feature == feature).collect();
        of_feature.sort_by(|a, b| a.start.total_cmp(&b.start));
        if let Some(pair) = of_feature.windows(2).find(|pair| pair[1].start <= pair[0].end) {
            out.push(violation(
                "adas",
                "intervals of one feature must not overlap",
                Some(format!("start={}", pair[1].start)),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
