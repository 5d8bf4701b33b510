//! Signal-processing kernel: trace windowing, prediction residuals, α
//! estimation, steering entropy, zero-phase low-pass filtering, and
//! steering-wheel reversal rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Drive, PipelineConfig, Sequence, SequenceRecord, UniformTrace};
use crate::stats::{classify_curvature, CurvatureClass};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("window contains no samples")]
    EmptyWindow,
    #[error("sequence window holds {samples} steering samples, need at least {needed}")]
    WindowTooShort { samples: usize, needed: usize },
    #[error("need at least 4 samples to form residuals, got {samples}")]
    TooShort { samples: usize },
    #[error("residual series is empty")]
    EmptyResiduals,
    #[error("entropy scale alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("percentile must lie strictly between 0 and 1, got {0}")]
    InvalidPercentile(f64),
    #[error("no non-empty baseline residual series to estimate alpha from")]
    EmptyBaseline,
    #[error("baseline residuals are all zero; entropy bins would be degenerate")]
    DegenerateBaseline,
    #[error("cutoff must satisfy 0 < cutoff < rate/2, got {cutoff_hz} Hz at {sample_rate} Hz")]
    InvalidCutoff { cutoff_hz: f64, sample_rate: f64 },
}

/// Prediction errors `e_n` (degrees) of one sequence window; always 3
/// shorter than the window it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSeries {
    pub values: Vec<f64>,
}

impl ResidualSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The entropy bin scale α and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    /// Mean per-sequence percentile of |e|, degrees.
    pub alpha: f64,
    pub n_baseline_sequences: usize,
    pub percentile_used: f64,
}

/// Proportions of residuals over the nine entropy bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinDistribution {
    pub proportions: [f64; 9],
}

/// Samples of `trace` with `start <= t_i <= end`, located by grid index
/// arithmetic (a small tolerance keeps grid-exact bounds inclusive after
/// float round-off). No interpolation at the edges.
pub fn window_samples(trace: &UniformTrace, start: f64, end: f64) -> Result<&[f64], MetricsError> {
    const EPS: f64 = 1e-9;
    if trace.is_empty() {
        return Err(MetricsError::EmptyWindow);
    }
    let lo = ((start - trace.start_time) * trace.sample_rate - EPS).ceil().max(0.0);
    let hi = ((end - trace.start_time) * trace.sample_rate + EPS)
        .floor()
        .min((trace.len() - 1) as f64);
    if hi < 0.0 || lo > hi {
        return Err(MetricsError::EmptyWindow);
    }
    Ok(&trace.values[lo as usize..=hi as usize])
}

/// Backward-extrapolation prediction errors: each sample is predicted from
/// the three before it and the surprise is the residual.
///
/// The predictor θ̂_n = θ_{n−1} + Δ + (Δ − Δ′) with Δ = θ_{n−1} − θ_{n−2},
/// Δ′ = θ_{n−2} − θ_{n−3} carries the full second difference, which makes
/// it exact on every polynomial of degree ≤ 2 (third-difference identity);
/// smooth steering predicts itself and only corrections leave residuals.
pub fn taylor_residuals(theta: &[f64]) -> Result<ResidualSeries, MetricsError> {
    if theta.len() < 4 {
        return Err(MetricsError::TooShort { samples: theta.len() });
    }
    let mut values = Vec::with_capacity(theta.len() - 3);
    for n in 3..theta.len() {
        let d1 = theta[n - 1] - theta[n - 2];
        let d2 = theta[n - 2] - theta[n - 3];
        let predicted = theta[n - 1] + d1 + (d1 - d2);
        values.push(theta[n] - predicted);
    }
    Ok(ResidualSeries { values })
}

/// Quantile by linear interpolation between order statistics:
/// position h = (n−1)·q on the ascending-sorted values.
pub(crate) fn linear_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Per baseline sequence, α_k = the `percentile`-th linear-interpolation
/// quantile of |e|; the estimate is the arithmetic mean of the α_k.
pub fn estimate_alpha(
    baseline_residuals: &[ResidualSeries],
    percentile: f64,
) -> Result<AlphaEstimate, MetricsError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(MetricsError::InvalidPercentile(percentile));
    }
    let mut alphas = Vec::new();
    for series in baseline_residuals {
        if series.is_empty() {
            continue;
        }
        let mut abs: Vec<f64> = series.values.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        alphas.push(linear_quantile(&abs, percentile));
    }
    if alphas.is_empty() {
        return Err(MetricsError::EmptyBaseline);
    }
    let alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
    if alpha == 0.0 {
        return Err(MetricsError::DegenerateBaseline);
    }
    Ok(AlphaEstimate { alpha, n_baseline_sequences: alphas.len(), percentile_used: percentile })
}

/// Multiples of α forming the eight finite bin edges; the outer bins are
/// unbounded so outliers never explode the entropy.
const BIN_EDGE_SCALES: [f64; 8] = [-5.0, -2.5, -1.0, -0.5, 0.5, 1.0, 2.5, 5.0];

/// Shannon entropy (base 9, so H ∈ [0,1]) of residuals over nine bins with
/// edges (−∞, −5α, −2.5α, −α, −0.5α, 0.5α, α, 2.5α, 5α, +∞).
pub fn steering_entropy(
    residuals: &ResidualSeries,
    alpha: &AlphaEstimate,
) -> Result<(f64, BinDistribution), MetricsError> {
    let a = alpha.alpha;
    if !(a > 0.0 && a.is_finite()) {
        return Err(MetricsError::InvalidAlpha(a));
    }
    if residuals.is_empty() {
        return Err(MetricsError::EmptyResiduals);
    }
    let edges = BIN_EDGE_SCALES.map(|s| s * a);
    let mut counts = [0usize; 9];
    for &e in &residuals.values {
        // Left-closed bins: the bin index is the number of edges ≤ e.
        let idx = edges.iter().take_while(|&&edge| e >= edge).count();
        counts[idx] += 1;
    }
    let total = residuals.len() as f64;
    let proportions = counts.map(|c| c as f64 / total);
    let ln9 = 9f64.ln();
    let mut h = 0.0;
    for p in proportions {
        if p > 0.0 {
            h -= p * p.ln() / ln9;
        }
    }
    // The uniform case evaluates to 1 + O(1e-16); keep the contract exact.
    Ok((h.clamp(0.0, 1.0), BinDistribution { proportions }))
}

/// Zero-phase second-order low-pass: a Butterworth biquad (bilinear
/// transform with prewarped cutoff) run forward then backward, so the
/// passband keeps its phase. Output length equals input length.
pub fn lowpass(values: &[f64], sample_rate: f64, cutoff_hz: f64) -> Result<Vec<f64>, MetricsError> {
    if !(sample_rate > 0.0 && cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
        return Err(MetricsError::InvalidCutoff { cutoff_hz, sample_rate });
    }
    let n = values.len();
    if n < 2 {
        return Ok(values.to_vec());
    }

    // H(s) = 1 / (s² + √2·s + 1) at the prewarped cutoff, discretized by
    // the bilinear transform. DC gain is exactly 1: b0+b1+b2 = 1+a1+a2.
    let w = (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
    let k = 1.0 + std::f64::consts::SQRT_2 * w + w * w;
    let b0 = w * w / k;
    let b1 = 2.0 * b0;
    let b2 = b0;
    let a1 = 2.0 * (w * w - 1.0) / k;
    let a2 = (1.0 - std::f64::consts::SQRT_2 * w + w * w) / k;
    // Steady-state filter state for a unit constant input; scaling it by
    // the first sample starts each pass settled (constants pass through
    // unchanged and edge transients vanish).
    let zi2 = b2 - a2;
    let zi1 = b1 - a1 + zi2;

    let pass = |x: &[f64]| -> Vec<f64> {
        let mut z1 = zi1 * x[0];
        let mut z2 = zi2 * x[0];
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    };

    // Odd-reflection padding keeps the signal's slope continuous at the
    // edges; 9 samples covers 3× the filter length, as is conventional.
    let pad = 9.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * values[0] - values[i]);
    }
    ext.extend_from_slice(values);
    for i in 1..=pad {
        ext.push(2.0 * values[n - 1] - values[n - 1 - i]);
    }

    let mut forward = pass(&ext);
    forward.reverse();
    let mut backward = pass(&forward);
    backward.reverse();
    Ok(backward[pad..pad + n].to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Swing {
    Up,
    Down,
}

/// Stationary points of `x` as (index, value): sign changes of the first
/// difference, with plateaus collapsed to their midpoint sample.
fn stationary_points(x: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut prev_sign = 0i8;
    // Index just after the previous non-zero difference — the start of a
    // possible plateau.
    let mut plateau_start = 0usize;
    for i in 0..x.len().saturating_sub(1) {
        let d = x[i + 1] - x[i];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            continue;
        };
        if prev_sign != 0 && sign != prev_sign {
            // Extremum plateau spans samples plateau_start..=i (one sample
            // when no plateau); report its midpoint.
            let mid = (plateau_start + i) / 2;
            out.push((mid, x[plateau_start]));
        }
        prev_sign = sign;
        plateau_start = i + 1;
    }
    out
}

/// Count reversals among time-ordered extrema with a hysteresis walk: a
/// reversal is a swing of at least `gap_deg` against the reference
/// extremum, in the direction opposite to the previously counted swing.
/// The reference extends with the current swing (a further move in the
/// counted direction shifts it without counting), and before the first
/// count it tracks the running extremes on both sides. This walk realizes
/// the maximum alternating gap-exceeding chain over all extrema pairs, so
/// the count is monotone non-increasing in `gap_deg`.
fn count_reversals_in_extrema(extrema: &[(usize, f64)], gap_deg: f64) -> usize {
    let Some((&(_, first), rest)) = extrema.split_first() else {
        return 0;
    };
    let mut count = 0usize;
    let (mut lo, mut hi) = (first, first);
    let mut anchor = first;
    let mut last_swing: Option<Swing> = None;
    for &(_, v) in rest {
        match last_swing {
            None => {
                // No direction yet: the first counted swing may start from
                // the lowest or highest extremum seen so far. (Both tests
                // cannot fire at once — that would need a ≥ 2·gap range,
                // which would have triggered on an earlier extremum.)
                if v - lo >= gap_deg {
                    count = 1;
                    anchor = v;
                    last_swing = Some(Swing::Up);
                } else if hi - v >= gap_deg {
                    count = 1;
                    anchor = v;
                    last_swing = Some(Swing::Down);
                } else {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Some(dir) => {
                let diff = v - anchor;
                let swing = if diff > 0.0 {
                    Swing::Up
                } else if diff < 0.0 {
                    Swing::Down
                } else {
                    continue;
                };
                if swing == dir {
                    // The counted swing runs further; move the reference.
                    anchor = v;
                } else if diff.abs() >= gap_deg {
                    count += 1;
                    anchor = v;
                    last_swing = Some(swing);
                }
            }
        }
    }
    count
}

/// Number of gap-exceeding reversals in an (already filtered) window.
pub fn reversal_count(theta_filtered: &[f64], gap_deg: f64) -> usize {
    count_reversals_in_extrema(&stationary_points(theta_filtered), gap_deg)
}

/// Steering-wheel reversal rate: reversals per minute over a window of
/// `duration_s` seconds. Short or flat signals yield 0.
pub fn swrr(theta_filtered: &[f64], gap_deg: f64, duration_s: f64) -> f64 {
    debug_assert!(gap_deg > 0.0, "gap must be positive, got {gap_deg}");
    if theta_filtered.len() < 2 || !(duration_s > 0.0) {
        return 0.0;
    }
    reversal_count(theta_filtered, gap_deg) as f64 / (duration_s / 60.0)
}

/// One reversal-rate value at a gap threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwrrValue {
    pub gap_deg: f64,
    pub per_minute: f64,
}

/// Everything measured on one sequence window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub sequence: SequenceRecord,
    /// Normalized steering entropy, in [0,1].
    pub steering_entropy: f64,
    /// Reversal rates, one per configured gap, ascending by gap.
    pub swrr: Vec<SwrrValue>,
    /// Mean speed over the window, km/h.
    pub mean_speed: f64,
    /// Window length, seconds.
    pub duration: f64,
    pub curvature: CurvatureClass,
    pub n_interactions: usize,
    /// Interactions per second of core time (core floored at one sample
    /// period so single-event sequences stay finite).
    pub interaction_density: f64,
}

impl SequenceMetrics {
    /// Reversal rate at one of the configured gaps, if present.
    pub fn swrr_at(&self, gap_deg: f64) -> Option<f64> {
        self.swrr.iter().find(|v| v.gap_deg == gap_deg).map(|v| v.per_minute)
    }
}

/// Compute all per-sequence metrics over the sequence's buffered window.
pub fn compute_sequence_metrics(
    drive: &Drive,
    sequence: &Sequence,
    alpha: &AlphaEstimate,
    cfg: &PipelineConfig,
) -> Result<SequenceMetrics, MetricsError> {
    let theta = window_samples(&drive.steering, sequence.window_start, sequence.window_end)?;
    if theta.len() < 4 {
        return Err(MetricsError::WindowTooShort { samples: theta.len(), needed: 4 });
    }
    let speed = window_samples(&drive.speed, sequence.window_start, sequence.window_end)?;

    let residuals = taylor_residuals(theta)?;
    let (entropy, _) = steering_entropy(&residuals, alpha)?;

    let filtered = lowpass(theta, drive.steering.sample_rate, cfg.lowpass_cutoff)?;
    let duration = sequence.window_duration();
    let swrr_values = cfg
        .swrr_gaps
        .iter()
        .map(|&gap_deg| SwrrValue { gap_deg, per_minute: swrr(&filtered, gap_deg, duration) })
        .collect();

    let n_interactions = sequence.n_events();
    let min_core = 1.0 / drive.steering.sample_rate;
    let density = n_interactions as f64 / sequence.core_duration().max(min_core);

    Ok(SequenceMetrics {
        sequence: sequence.record(),
        steering_entropy: entropy,
        swrr: swrr_values,
        mean_speed: speed.iter().sum::<f64>() / speed.len() as f64,
        duration,
        curvature: classify_curvature(&filtered, cfg),
        n_interactions,
        interaction_density: density,
    })
}

// ---------------------------------------------------------------------------
