//! Steering-based driver-distraction metrics from vehicle telemetry.
//!
//! The pipeline ingests per-drive logs of steering angle and speed (uniform
//! 5 Hz traces after regularization) together with touchscreen interaction
//! events and driver-assistance state, then:
//!
//! 1. groups interaction events into sequences by time gap ([`sequencer`]),
//! 2. samples duration-matched no-interaction baselines from the same drives,
//! 3. computes steering entropy and steering-wheel reversal rates per
//!    sequence window ([`metrics`]),
//! 4. aggregates both groups into speed-bucketed, curvature-split effect-size
//!    comparisons ([`stats`]).
//!
//! A seeded synthetic drive generator ([`synth`]) provides ground-truth
//! corpora for end-to-end validation.

pub mod ingest;
pub mod metrics;
pub mod model;
pub mod sequencer;
pub mod stats;
pub mod synth;

pub use model::{Drive, PipelineConfig, Sequence, SequenceKind};
