//! Seeded synthetic drive generator with labeled distraction episodes:
//! the ground-truth oracle for end-to-end sensitivity tests.
//!
//! Steering is modeled as a road-following state (first-order pursuit of
//! the road profile's angle) plus intermittent correction pulses smoothed
//! by the same time constant. Inside a distraction episode the pulses
//! become rarer and larger — the canonical distracted-steering signature
//! that raises both entropy and reversal metrics — while curved road
//! segments add an independent curvature-tracking pulse process that is
//! deliberately unaffected by distraction (it dilutes group differences
//! on curves, which is exactly what curvature-split comparisons measure).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Drive, Gesture, UIEvent, UniformTrace};

/// Spacing of synthetic taps inside an episode, seconds. Well under the
/// default 10 s grouping threshold, so an episode always extracts as one
/// interaction sequence.
pub const TAP_GAP: f64 = 2.0;

/// Minimum distance between consecutive episodes, seconds. Must exceed
/// the default grouping threshold so neighboring episodes never fuse into
/// one extracted sequence.
pub const EPISODE_SEPARATION: f64 = 10.0;

/// Speed used where the profile says nothing, km/h.
pub const DEFAULT_SPEED: f64 = 50.0;

#[derive(Debug, Error)]
#[error("invalid synth config: `{field}` {reason}")]
pub struct InvalidConfig {
    pub field: &'static str,
    pub reason: String,
}

fn bad(field: &'static str, reason: impl Into<String>) -> InvalidConfig {
    InvalidConfig { field, reason: reason.into() }
}

/// One stretch of road with a constant characteristic steering angle
/// (0 = straight).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub start: f64,
    pub end: f64,
    /// Mean steering angle the road demands, degrees.
    pub curvature_angle: f64,
}

/// One distraction episode; taps are emitted from start to end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start: f64,
    pub end: f64,
}

/// Speed takes this value from `t` until the next step (carry-forward).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedStep {
    pub t: f64,
    pub speed_kmh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Drive length, seconds.
    pub duration: f64,
    /// Grid rate, Hz.
    pub sample_rate: f64,
    /// Road curvature profile; uncovered time is straight.
    pub road_profile: Vec<RoadSegment>,
    /// Mean seconds between correction pulses.
    pub correction_interval_mean: f64,
    /// Standard deviation of a correction pulse, degrees.
    pub correction_magnitude_sd: f64,
    /// First-order smoothing time constant, seconds.
    pub smoothing_tau: f64,
    /// Distraction episodes (sorted, separated by > EPISODE_SEPARATION).
    pub episodes: Vec<Episode>,
    /// Pulse-magnitude factor inside episodes (≥ 1).
    pub magnitude_multiplier: f64,
    /// Pulse-interval factor inside episodes (≥ 1; rarer pulses).
    pub interval_multiplier: f64,
    /// Piecewise-constant speed profile (carry-forward; 50 km/h before
    /// the first step or when empty).
    pub speed_profile: Vec<SpeedStep>,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration: 600.0,
            sample_rate: 5.0,
            road_profile: Vec::new(),
            correction_interval_mean: 0.3,
            correction_magnitude_sd: 0.6,
            smoothing_tau: 0.3,
            episodes: Vec::new(),
            magnitude_multiplier: 1.0,
            interval_multiplier: 1.0,
            speed_profile: Vec::new(),
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    /// End of the sample grid; episodes must fit inside it so every tap
    /// lands within the trace span.
    fn grid_end(&self) -> f64 {
        let n = (self.duration * self.sample_rate + 1e-9).floor() as usize;
        n as f64 / self.sample_rate
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(bad("duration", format!("must be positive and finite, got {}", self.duration)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(bad("sample_rate", format!("must be positive and finite, got {}", self.sample_rate)));
        }
        if !(self.correction_interval_mean > 0.0 && self.correction_interval_mean.is_finite()) {
            return Err(bad("correction_interval_mean", "must be positive and finite"));
        }
        if !(self.correction_magnitude_sd >= 0.0 && self.correction_magnitude_sd.is_finite()) {
            return Err(bad("correction_magnitude_sd", "must be non-negative and finite"));
        }
        if !(self.smoothing_tau > 0.0 && self.smoothing_tau.is_finite()) {
            return Err(bad("smoothing_tau", "must be positive and finite"));
        }
        if !(self.magnitude_multiplier >= 1.0 && self.magnitude_multiplier.is_finite()) {
            return Err(bad("magnitude_multiplier", format!("must be ≥ 1, got {}", self.magnitude_multiplier)));
        }
        if !(self.interval_multiplier >= 1.0 && self.interval_multiplier.is_finite()) {
            return Err(bad("interval_multiplier", format!("must be ≥ 1, got {}", self.interval_multiplier)));
        }
        let grid_end = self.grid_end();
        for (i, e) in self.episodes.iter().enumerate() {
            if !(e.start >= 0.0 && e.start < e.end && e.end <= grid_end) {
                return Err(bad(
                    "episodes",
                    format!("episode {i} [{}, {}] must lie within the trace span [0, {grid_end}]", e.start, e.end),
                ));
            }
            if i > 0 {
                let gap = e.start - self.episodes[i - 1].end;
                if gap <= EPISODE_SEPARATION {
                    return Err(bad(
                        "episodes",
                        format!("episodes {} and {i} are {gap} s apart; need > {EPISODE_SEPARATION} s so they extract separately", i - 1),
                    ));
                }
            }
        }
        for (i, s) in self.road_profile.iter().enumerate() {
            if !(s.start >= 0.0 && s.start < s.end && s.curvature_angle.is_finite()) {
                return Err(bad("road_profile", format!("segment {i} malformed")));
            }
            if i > 0 && s.start < self.road_profile[i - 1].end {
                return Err(bad("road_profile", format!("segment {i} overlaps its predecessor")));
            }
        }
        for (i, s) in self.speed_profile.iter().enumerate() {
            if !(s.t >= 0.0 && s.t.is_finite() && s.speed_kmh >= 0.0 && s.speed_kmh.is_finite()) {
                return Err(bad("speed_profile", format!("step {i} malformed")));
            }
            if i > 0 && s.t <= self.speed_profile[i - 1].t {
                return Err(bad("speed_profile", format!("step {i} not after its predecessor")));
            }
        }
        Ok(())
    }

    fn road_angle(&self, t: f64) -> f64 {
        self.road_profile
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .map(|s| s.curvature_angle)
            .unwrap_or(0.0)
    }

    fn in_episode(&self, t: f64) -> bool {
        self.episodes.iter().any(|e| t >= e.start && t <= e.end)
    }

    fn speed_at(&self, t: f64) -> f64 {
        self.speed_profile
            .iter()
            .rev()
            .find(|s| s.t <= t)
            .map(|s| s.speed_kmh)
            .unwrap_or(DEFAULT_SPEED)
    }
}

/// What one episode actually produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTruth {
    pub start: f64,
    pub end: f64,
    pub n_taps: usize,
}

/// Ground-truth labels for one generated drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub drive_id: String,
    pub episodes: Vec<EpisodeTruth>,
}

/// Sensitivity of the curvature-tracking pulse process: its pulse SD is
/// `correction_magnitude_sd × |road angle| × CURVE_TRACKING_SD_PER_DEG`.
const CURVE_TRACKING_SD_PER_DEG: f64 = 0.05;

/// Generates one drive and its ground truth. Same config (including seed)
/// → bit-identical output.
pub fn generate_drive(cfg: &SynthConfig, drive_id: &str) -> Result<(Drive, GroundTruth), InvalidConfig> {
    cfg.validate()?;
    let rate = cfg.sample_rate;
    let n = (cfg.duration * rate + 1e-9).floor() as usize + 1;
    let span_end = (n - 1) as f64 / rate;
    let dt = 1.0 / rate;
    let decay = (-dt / cfg.smoothing_tau).exp();
    let blend = 1.0 - decay;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    // Correction pulses, accumulated per sample (a pulse lands on the
    // first grid sample at or after its time).
    let mut impulse = vec![0.0f64; n];
    let deposit = |impulse: &mut Vec<f64>, tp: f64, sd: f64, z: f64| {
        let idx = (tp * rate).ceil() as usize;
        if idx < impulse.len() {
            impulse[idx] += z * sd;
        }
    };
    let mut tp = 0.0f64;
    loop {
        let mean = cfg.correction_interval_mean
            * if cfg.in_episode(tp) { cfg.interval_multiplier } else { 1.0 };
        let step: f64 = rng.sample(Exp1);
        tp += step * mean;
        if tp > span_end {
            break;
        }
        let sd = cfg.correction_magnitude_sd
            * if cfg.in_episode(tp) { cfg.magnitude_multiplier } else { 1.0 };
        let z: f64 = rng.sample(StandardNormal);
        deposit(&mut impulse, tp, sd, z);
    }
    // Curvature-tracking pulses: only on curved road, never modulated by
    // distraction — shared steering activity that both groups exhibit.
    let mut tq = 0.0f64;
    loop {
        let step: f64 = rng.sample(Exp1);
        tq += step * cfg.correction_interval_mean;
        if tq > span_end {
            break;
        }
        let angle = cfg.road_angle(tq).abs();
        let z: f64 = rng.sample(StandardNormal);
        if angle > 0.0 {
            let sd = cfg.correction_magnitude_sd * angle * CURVE_TRACKING_SD_PER_DEG;
            deposit(&mut impulse, tq, sd, z);
        }
    }

    let mut theta = Vec::with_capacity(n);
    let mut road_state = cfg.road_angle(0.0);
    let mut correction = 0.0f64;
    for i in 0..n {
        let t = i as f64 / rate;
        if i > 0 {
            road_state += (cfg.road_angle(t) - road_state) * blend;
            correction *= decay;
        }
        correction += impulse[i];
        theta.push(road_state + correction);
    }

    let speed: Vec<f64> = (0..n).map(|i| cfg.speed_at(i as f64 / rate)).collect();

    let mut ui_events = Vec::new();
    let mut truth = Vec::new();
    for e in &cfg.episodes {
        let mut n_taps = 0usize;
        let mut k = 0usize;
        loop {
            let t = e.start + k as f64 * TAP_GAP;
            if t > e.end {
                break;
            }
            ui_events.push(UIEvent { t, element: "hmi_tile".into(), gesture: Gesture::Tap });
            n_taps += 1;
            k += 1;
        }
        // Pin the final tap to the episode end so the extracted core spans
        // the episode exactly.
        if ui_events.last().map(|u| u.t < e.end).unwrap_or(false) {
            ui_events.push(UIEvent { t: e.end, element: "hmi_tile".into(), gesture: Gesture::Tap });
            n_taps += 1;
        }
        truth.push(EpisodeTruth { start: e.start, end: e.end, n_taps });
    }

    let drive = Drive {
        drive_id: drive_id.to_string(),
        steering: UniformTrace::new(0.0, rate, theta),
        speed: UniformTrace::new(0.0, rate, speed),
        ui_events,
        adas: Vec::new(),
    };
    let truth = GroundTruth { drive_id: drive_id.to_string(), episodes: truth };
    Ok((drive, truth))
}

/// A batch of identically-shaped drives with per-drive derived seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_drives: usize,
    pub drive: SynthConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { n_drives: 1, drive: SynthConfig::default() }
    }
}

/// SplitMix64 finalizer; a full-avalanche mix for seed derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for drive `index` in a corpus: the master seed and the index are
/// hashed together so drives are independent but fully reproducible.
pub fn per_drive_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 + 1))
}

/// Generates a corpus in parallel. Drive `i` is named `{prefix}-{i:04}`
/// and seeded by `per_drive_seed(drive.rng_seed, i)`; output order is by
/// index, so the batch is deterministic regardless of thread count.
pub fn generate_corpus(
    cfg: &CorpusConfig,
    prefix: &str,
) -> Result<Vec<(Drive, GroundTruth)>, InvalidConfig> {
    cfg.drive.validate()?;
    use rayon::prelude::*;
    (0..cfg.n_drives)
        .into_par_iter()
        .map(|i| {
            let mut drive_cfg = cfg.drive.clone();
            drive_cfg.rng_seed = per_drive_seed(cfg.drive.rng_seed, i);
            generate_drive(&drive_cfg, &format!("{prefix}-{i:04}"))
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{steering_entropy, taylor_residuals, AlphaEstimate};
    use crate::model::{validate_drive, PipelineConfig};
    use crate::sequencer::extract_interaction_sequences;

    fn alpha_of(a: f64) -> AlphaEstimate {
        AlphaEstimate { alpha: a, n_baseline_sequences: 1, percentile_used: 0.9 }
    }

    #[test]
    fn noiseless_straight_road_steers_exactly_zero() {
        let cfg = SynthConfig {
            duration: 120.0,
            correction_magnitude_sd: 0.0,
            ..SynthConfig::default()
        };
        let (drive, _) = generate_drive(&cfg, "quiet").unwrap();
        assert!(drive.steering.values.iter().all(|v| *v == 0.0));
        let residuals = taylor_residuals(&drive.steering.values).unwrap();
        let (h, _) = steering_entropy(&residuals, &alpha_of(1.0)).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical_and_different_seeds_differ() {
        let cfg = SynthConfig {
            duration: 300.0,
            episodes: vec![Episode { start: 50.0, end: 60.0 }],
            magnitude_multiplier: 2.0,
            ..SynthConfig::default()
        };
        let a = generate_drive(&cfg, "d").unwrap();
        let b = generate_drive(&cfg, "d").unwrap();
        assert_eq!(a, b);
        let other = SynthConfig { rng_seed: 7, ..cfg };
        let c = generate_drive(&other, "d").unwrap();
        assert_ne!(a.0.steering.values, c.0.steering.values);
    }

    #[test]
    fn generated_drives_validate_cleanly() {
        let cfg = SynthConfig {
            duration: 400.0,
            road_profile: vec![RoadSegment { start: 100.0, end: 200.0, curvature_angle: 15.0 }],
            episodes: vec![
                Episode { start: 30.0, end: 45.0 },
                Episode { start: 90.0, end: 97.0 },
                Episode { start: 300.0, end: 321.0 },
            ],
            magnitude_multiplier: 3.0,
            interval_multiplier: 2.0,
            speed_profile: vec![SpeedStep { t: 0.0, speed_kmh: 30.0 }, SpeedStep { t: 200.0, speed_kmh: 100.0 }],
            rng_seed: 42,
            ..SynthConfig::default()
        };
        let (drive, truth) = generate_drive(&cfg, "d").unwrap();
        assert_eq!(validate_drive(&drive), vec![]);
        assert_eq!(truth.episodes.len(), 3);
        assert!(truth.episodes.iter().all(|e| e.n_taps >= 2));
    }

    #[test]
    fn each_episode_extracts_as_exactly_one_sequence_spanning_it() {
        let cfg = SynthConfig {
            duration: 500.0,
            episodes: vec![
                Episode { start: 40.0, end: 61.0 },
                Episode { start: 100.0, end: 103.0 },
                Episode { start: 200.0, end: 201.5 },
            ],
            ..SynthConfig::default()
        };
        let (drive, truth) = generate_drive(&cfg, "d").unwrap();
        let seqs = extract_interaction_sequences(&drive, &PipelineConfig::default());
        assert_eq!(seqs.len(), 3);
        for (seq, ep) in seqs.iter().zip(&truth.episodes) {
            assert_eq!(seq.core_start, ep.start);
            assert_eq!(seq.core_end, ep.end);
            assert_eq!(seq.n_events(), ep.n_taps);
            assert_eq!(seq.window_start, ep.start - 2.0);
            assert_eq!(seq.window_end, ep.end + 2.0);
            assert!(!seq.clipped);
        }
    }

    #[test]
    fn speed_profile_carries_forward() {
        let cfg = SynthConfig {
            duration: 100.0,
            speed_profile: vec![SpeedStep { t: 10.0, speed_kmh: 30.0 }, SpeedStep { t: 60.0, speed_kmh: 80.0 }],
            ..SynthConfig::default()
        };
        let (drive, _) = generate_drive(&cfg, "d").unwrap();
        let at = |t: f64| drive.speed.values[(t * 5.0).round() as usize];
        assert_eq!(at(0.0), DEFAULT_SPEED); // before the first step
        assert_eq!(at(10.0), 30.0);
        assert_eq!(at(59.8), 30.0);
        assert_eq!(at(60.0), 80.0);
        assert_eq!(at(100.0), 80.0);
    }

    #[test]
    fn road_profile_shifts_the_steering_mean() {
        let cfg = SynthConfig {
            duration: 200.0,
            road_profile: vec![RoadSegment { start: 100.0, end: 200.0, curvature_angle: 20.0 }],
            correction_magnitude_sd: 0.2,
            rng_seed: 3,
            ..SynthConfig::default()
        };
        let (drive, _) = generate_drive(&cfg, "d").unwrap();
        let half = drive.steering.len() / 2;
        let mean_first: f64 =
            drive.steering.values[..half].iter().sum::<f64>() / half as f64;
        let mean_second: f64 =
            drive.steering.values[half + 50..].iter().sum::<f64>() / (drive.steering.len() - half - 50) as f64;
        assert!(mean_first.abs() < 2.0, "straight half mean {mean_first}");
        assert!((mean_second - 20.0).abs() < 2.0, "curved half mean {mean_second}");
    }

    #[test]
    fn invalid_configs_name_the_offending_field() {
        let bad_duration = SynthConfig { duration: -5.0, ..SynthConfig::default() };
        assert_eq!(bad_duration.validate().unwrap_err().field, "duration");

        let close_episodes = SynthConfig {
            duration: 100.0,
            episodes: vec![Episode { start: 10.0, end: 20.0 }, Episode { start: 25.0, end: 30.0 }],
            ..SynthConfig::default()
        };
        assert_eq!(close_episodes.validate().unwrap_err().field, "episodes");

        let out_of_range = SynthConfig {
            duration: 100.0,
            episodes: vec![Episode { start: 95.0, end: 105.0 }],
            ..SynthConfig::default()
        };
        assert_eq!(out_of_range.validate().unwrap_err().field, "episodes");

        let weak_multiplier = SynthConfig { magnitude_multiplier: 0.5, ..SynthConfig::default() };
        assert_eq!(weak_multiplier.validate().unwrap_err().field, "magnitude_multiplier");
    }

    #[test]
    fn corpus_generation_is_deterministic_and_per_drive_distinct() {
        let cfg = CorpusConfig {
            n_drives: 4,
            drive: SynthConfig { duration: 60.0, ..SynthConfig::default() },
        };
        let a = generate_corpus(&cfg, "synth").unwrap();
        let b = generate_corpus(&cfg, "synth").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].0.drive_id, "synth-0000");
        assert_eq!(a[3].0.drive_id, "synth-0003");
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert_ne!(a[i].0.steering.values, a[j].0.steering.values);
            }
        }
    }
}
