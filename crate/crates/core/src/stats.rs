//! Curvature classification, speed bucketing, group statistics, and the
//! standardized-effect-size comparison report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::SequenceMetrics;
use crate::model::PipelineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureClass {
    Straight,
    Curved,
}

impl std::fmt::Display for CurvatureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurvatureClass::Straight => "straight",
            CurvatureClass::Curved => "curved",
        })
    }
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 samples per group, got {n_a} and {n_b}")]
    TooFewSamples { n_a: usize, n_b: usize },
    #[error("pooled standard deviation is zero; effect size undefined")]
    ZeroVariance,
}

/// Curved iff the fraction of samples with |θ| above the angle threshold
/// strictly exceeds the configured fraction. Expects the low-pass-filtered
/// window so isolated jitter does not masquerade as a curve; an empty
/// window counts as straight.
pub fn classify_curvature(theta_filtered: &[f64], cfg: &PipelineConfig) -> CurvatureClass {
    if theta_filtered.is_empty() {
        return CurvatureClass::Straight;
    }
    let over = theta_filtered.iter().filter(|v| v.abs() > cfg.curvature_threshold).count();
    if over as f64 / theta_filtered.len() as f64 > cfg.curvature_fraction {
        CurvatureClass::Curved
    } else {
        CurvatureClass::Straight
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n−1 denominator.
fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standardized mean difference (a minus b) over the pooled standard
/// deviation, with n−1 sample variances.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (n_a, n_b) = (a.len(), b.len());
    if n_a < 2 || n_b < 2 {
        return Err(StatsError::TooFewSamples { n_a, n_b });
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    let pooled =
        (((n_a - 1) as f64 * va + (n_b - 1) as f64 * vb) / (n_a + n_b - 2) as f64).sqrt();
    if pooled == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((ma - mb) / pooled)
}

/// Index of the half-open speed bucket [e_i, e_{i+1}) containing `speed`.
/// The top bucket is open-ended; speeds below the first edge land in
/// bucket 0 so the assignment is total.
pub fn bucket_index(speed: f64, edges: &[f64]) -> usize {
    edges.partition_point(|e| *e <= speed).saturating_sub(1)
}

/// Human-readable label of bucket `idx`, e.g. `[30,60)` or `[120,inf)`.
pub fn bucket_label(edges: &[f64], idx: usize) -> String {
    match edges.get(idx + 1) {
        Some(hi) => format!("[{},{})", edges[idx], hi),
        None => format!("[{},inf)", edges[idx]),
    }
}

/// Groups sequence metrics into one list per speed bucket (one bucket per
/// edge, the last open-ended), preserving input order within buckets.
pub fn bucket_by_speed<'a>(
    metrics: &'a [SequenceMetrics],
    edges: &[f64],
) -> Vec<Vec<&'a SequenceMetrics>> {
    let mut buckets: Vec<Vec<&SequenceMetrics>> = vec![Vec::new(); edges.len()];
    for m in metrics {
        buckets[bucket_index(m.mean_speed, edges)].push(m);
    }
    buckets
}

/// Mean / standard deviation / count of one group in one report cell.
/// Groups with fewer than two sequences keep their count but carry null
/// statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl GroupStats {
    fn of(values: &[f64]) -> Self {
        if values.len() < 2 {
            return GroupStats { mean: None, sd: None, n: values.len() };
        }
        let m = mean(values);
        GroupStats { mean: Some(m), sd: Some(sample_variance(values, m).sqrt()), n: values.len() }
    }
}

/// One (metric × curvature × bucket) comparison between the interaction
/// and baseline groups. `bucket` is a label like `[30,60)`, or `overall`
/// for the bucket-pooled cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub metric: String,
    pub condition: CurvatureClass,
    pub bucket: String,
    pub interaction: GroupStats,
    pub baseline: GroupStats,
    /// Cohen's d (interaction minus baseline); null when either group has
    /// fewer than two sequences or the pooled variance is zero.
    pub d: Option<f64>,
}

/// Headline effect size of one metric under one curvature condition
/// (taken from the overall cells; both groups have n ≥ 2 and d is finite).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub metric: String,
    pub condition: CurvatureClass,
    pub d: f64,
    pub n_interaction: usize,
    pub n_baseline: usize,
}

/// The full comparison: group statistics and effect sizes per metric,
/// curvature condition, and speed bucket, plus the config that shaped it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: PipelineConfig,
    pub cells: Vec<ReportCell>,
    pub effect_sizes: Vec<EffectSize>,
}

#[derive(Clone, Copy)]
enum MetricKind {
    SteeringEntropy,
    Swrr(f64),
}

impl MetricKind {
    fn label(self) -> String {
        match self {
            MetricKind::SteeringEntropy => "se".to_string(),
            MetricKind::Swrr(gap) => format!("swrr_{gap}deg"),
        }
    }

    fn value(self, m: &SequenceMetrics) -> Option<f64> {
        match self {
            MetricKind::SteeringEntropy => Some(m.steering_entropy),
            MetricKind::Swrr(gap) => m.swrr_at(gap),
        }
    }
}

fn cell(
    metric: &str,
    condition: CurvatureClass,
    bucket: String,
    interaction: &[f64],
    baseline: &[f64],
) -> ReportCell {
    ReportCell {
        metric: metric.to_string(),
        condition,
        bucket,
        interaction: GroupStats::of(interaction),
        baseline: GroupStats::of(baseline),
        d: cohens_d(interaction, baseline).ok().filter(|d| d.is_finite()),
    }
}

/// Builds the comparison report: for every metric (SE plus one SWRR per
/// configured gap) and curvature condition, an overall cell followed by
/// one cell per speed bucket. Effect sizes are collected from the overall
/// cells that support them.
pub fn build_report(
    interaction_metrics: &[SequenceMetrics],
    baseline_metrics: &[SequenceMetrics],
    cfg: &PipelineConfig,
) -> ComparisonReport {
    let mut kinds = vec![MetricKind::SteeringEntropy];
    kinds.extend(cfg.swrr_gaps.iter().map(|&g| MetricKind::Swrr(g)));

    let mut cells = Vec::new();
    let mut effect_sizes = Vec::new();
    for kind in kinds {
        let label = kind.label();
        for condition in [CurvatureClass::Straight, CurvatureClass::Curved] {
            let pick = |ms: &[SequenceMetrics]| -> Vec<(usize, f64)> {
                ms.iter()
                    .filter(|m| m.curvature == condition)
                    .filter_map(|m| {
                        kind.value(m).map(|v| (bucket_index(m.mean_speed, &cfg.speed_bucket_edges), v))
                    })
                    .collect()
            };
            let inter = pick(interaction_metrics);
            let base = pick(baseline_metrics);

            let all_inter: Vec<f64> = inter.iter().map(|&(_, v)| v).collect();
            let all_base: Vec<f64> = base.iter().map(|&(_, v)| v).collect();
            let overall = cell(&label, condition, "overall".into(), &all_inter, &all_base);
            if let (Some(d), true, true) =
                (overall.d, overall.interaction.n >= 2, overall.baseline.n >= 2)
            {
                effect_sizes.push(EffectSize {
                    metric: label.clone(),
                    condition,
                    d,
                    n_interaction: overall.interaction.n,
                    n_baseline: overall.baseline.n,
                });
            }
            cells.push(overall);

            for idx in 0..cfg.speed_bucket_edges.len() {
                let iv: Vec<f64> =
                    inter.iter().filter(|&&(b, _)| b == idx).map(|&(_, v)| v).collect();
                let bv: Vec<f64> =
                    base.iter().filter(|&&(b, _)| b == idx).map(|&(_, v)| v).collect();
                cells.push(cell(
                    &label,
                    condition,
                    bucket_label(&cfg.speed_bucket_edges, idx),
                    &iv,
                    &bv,
                ));
            }
        }
    }
    ComparisonReport { config: cfg.clone(), cells, effect_sizes }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV rendering: one row per metric/condition/bucket/group with
/// mean, sd, and count (effect sizes live in the JSON form).
pub fn report_to_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("metric,condition,bucket,group,mean,sd,n\n");
    for c in &report.cells {
        for (group, stats) in [("interaction", &c.interaction), ("baseline", &c.baseline)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.metric,
                c.condition,
                c.bucket,
                group,
                fmt_opt(stats.mean),
                fmt_opt(stats.sd),
                stats.n
            ));
        }
    }
    out
}

/// Plot-ready per-bucket series (straight condition) for steering entropy
/// and, when a 2° gap is configured, the 2° reversal rate: pairs of
/// (metric label, CSV with bucket,group,mean,sd,n rows).
pub fn plot_series_csv(report: &ComparisonReport) -> Vec<(String, String)> {
    let mut wanted = vec!["se".to_string()];
    if report.config.swrr_gaps.contains(&2.0) {
        wanted.push("swrr_2deg".to_string());
    }
    wanted
        .into_iter()
        .map(|label| {
            let mut out = String::from("bucket,group,mean,sd,n\n");
            for c in report.cells.iter().filter(|c| {
                c.metric == label
                    && c.condition == CurvatureClass::Straight
                    && c.bucket != "overall"
            }) {
                for (group, stats) in [("interaction", &c.interaction), ("baseline", &c.baseline)]
                {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        c.bucket,
                        group,
                        fmt_opt(stats.mean),
                        fmt_opt(stats.sd),
                        stats.n
                    ));
                }
            }
            (label, out)
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::SwrrValue;
    use crate::model::{Sequence, SequenceKind};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    // ---- classify_curvature --------------------------------------------------

    #[test]
    fn curvature_examples() {
        let cfg = PipelineConfig::default(); // threshold 10°, fraction 0.2
        assert_eq!(classify_curvature(&[0.0; 50], &cfg), CurvatureClass::Straight);
        assert_eq!(classify_curvature(&[45.0; 50], &cfg), CurvatureClass::Curved);
        // 10% of samples at 30°: fraction 0.1 does not exceed 0.2.
        let mut w = vec![0.0; 45];
        w.extend(vec![30.0; 5]);
        assert_eq!(classify_curvature(&w, &cfg), CurvatureClass::Straight);
        // Sign does not matter.
        assert_eq!(classify_curvature(&[-45.0; 50], &cfg), CurvatureClass::Curved);
        assert_eq!(classify_curvature(&[], &cfg), CurvatureClass::Straight);
    }

    #[test]
    fn curvature_fraction_boundary_is_strict() {
        let cfg = PipelineConfig::default();
        // Exactly 20% over threshold is still straight ("exceeds" is strict).
        let mut w = vec![0.0; 40];
        w.extend(vec![30.0; 10]);
        assert_eq!(classify_curvature(&w, &cfg), CurvatureClass::Straight);
        w.push(30.0);
        assert_eq!(classify_curvature(&w, &cfg), CurvatureClass::Curved);
    }

    // ---- cohens_d --------------------------------------------------------------

    #[test]
    fn hand_computed_effect_size() {
        let d = cohens_d(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn identical_groups_have_zero_effect() {
        let d = cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn degenerate_groups_are_rejected() {
        assert!(matches!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::ZeroVariance)));
        assert!(matches!(
            cohens_d(&[1.0], &[2.0, 3.0]),
            Err(StatsError::TooFewSamples { n_a: 1, n_b: 2 })
        ));
    }

    #[test]
    fn effect_size_symmetries() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let a: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..9.0)).collect();
            let b: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..4.0)).collect();
            let d = cohens_d(&a, &b).unwrap();
            // antisymmetry
            assert_relative_eq!(cohens_d(&b, &a).unwrap(), -d, epsilon = 1e-12);
            // translation invariance
            let at: Vec<f64> = a.iter().map(|x| x + 11.0).collect();
            let bt: Vec<f64> = b.iter().map(|x| x + 11.0).collect();
            assert_relative_eq!(cohens_d(&at, &bt).unwrap(), d, epsilon = 1e-9);
            // common positive scaling leaves d unchanged
            let asc: Vec<f64> = a.iter().map(|x| x * 3.5).collect();
            let bsc: Vec<f64> = b.iter().map(|x| x * 3.5).collect();
            assert_relative_eq!(cohens_d(&asc, &bsc).unwrap(), d, epsilon = 1e-9);
        }
    }

    // ---- buckets ---------------------------------------------------------------

    const EDGES: [f64; 5] = [0.0, 30.0, 60.0, 90.0, 120.0];

    #[test]
    fn bucket_assignment_examples() {
        assert_eq!(bucket_index(0.0, &EDGES), 0);
        assert_eq!(bucket_index(29.999, &EDGES), 0);
        assert_eq!(bucket_index(30.0, &EDGES), 1); // half-open boundary
        assert_eq!(bucket_index(300.0, &EDGES), 4); // open-ended top
        assert_eq!(bucket_index(-5.0, &EDGES), 0); // clamped below
    }

    #[test]
    fn bucket_labels() {
        assert_eq!(bucket_label(&EDGES, 0), "[0,30)");
        assert_eq!(bucket_label(&EDGES, 3), "[90,120)");
        assert_eq!(bucket_label(&EDGES, 4), "[120,inf)");
    }

    fn metric_at(speed: f64, se: f64, swrr2: f64, curvature: CurvatureClass) -> SequenceMetrics {
        let kind =
            if se < 0.0 { SequenceKind::Baseline } else { SequenceKind::Interaction };
        let seq = Sequence {
            drive_id: "d".into(),
            kind,
            core_start: 2.0,
            core_end: 8.0,
            window_start: 0.0,
            window_end: 10.0,
            events: vec![],
            clipped: false,
        };
        SequenceMetrics {
            sequence: seq.record(),
            steering_entropy: se.abs(),
            swrr: vec![SwrrValue { gap_deg: 2.0, per_minute: swrr2 }],
            mean_speed: speed,
            duration: 10.0,
            curvature,
            n_interactions: 0,
            interaction_density: 0.0,
        }
    }

    #[test]
    fn bucketing_partitions_the_input() {
        let mut rng = StdRng::seed_from_u64(3);
        let ms: Vec<SequenceMetrics> = (0..500)
            .map(|_| {
                metric_at(rng.random_range(-10.0..200.0), 0.5, 1.0, CurvatureClass::Straight)
            })
            .collect();
        let buckets = bucket_by_speed(&ms, &EDGES);
        assert_eq!(buckets.len(), EDGES.len());
        assert_eq!(buckets.iter().map(Vec::len).sum::<usize>(), ms.len());
    }

    // ---- build_report ------------------------------------------------------------

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            swrr_gaps: vec![2.0],
            speed_bucket_edges: vec![0.0, 30.0, 60.0],
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn report_shape_and_counts() {
        let cfg = small_cfg();
        let inter: Vec<SequenceMetrics> = vec![
            metric_at(10.0, 0.6, 4.0, CurvatureClass::Straight),
            metric_at(20.0, 0.7, 5.0, CurvatureClass::Straight),
            metric_at(40.0, 0.8, 6.0, CurvatureClass::Straight),
        ];
        let base: Vec<SequenceMetrics> = vec![
            metric_at(12.0, 0.3, 1.0, CurvatureClass::Straight),
            metric_at(22.0, 0.4, 2.0, CurvatureClass::Straight),
            metric_at(45.0, 0.2, 3.0, CurvatureClass::Straight),
        ];
        let report = build_report(&inter, &base, &cfg);
        // 2 metrics × 2 conditions × (overall + 3 buckets)
        assert_eq!(report.cells.len(), 2 * 2 * 4);

        // Bucket counts sum to the overall count in every condition.
        for metric in ["se", "swrr_2deg"] {
            for condition in [CurvatureClass::Straight, CurvatureClass::Curved] {
                let of = |bucket: &str| {
                    report
                        .cells
                        .iter()
                        .find(|c| {
                            c.metric == metric && c.condition == condition && c.bucket == bucket
                        })
                        .unwrap()
                        .clone()
                };
                let overall = of("overall");
                let parts: Vec<ReportCell> =
                    ["[0,30)", "[30,60)", "[60,inf)"].iter().map(|b| of(b)).collect();
                assert_eq!(
                    parts.iter().map(|c| c.interaction.n).sum::<usize>(),
                    overall.interaction.n
                );
                assert_eq!(
                    parts.iter().map(|c| c.baseline.n).sum::<usize>(),
                    overall.baseline.n
                );
            }
        }

        // The curved condition saw no sequences: counts 0, null stats.
        let curved_overall = report
            .cells
            .iter()
            .find(|c| c.metric == "se" && c.condition == CurvatureClass::Curved && c.bucket == "overall")
            .unwrap();
        assert_eq!(curved_overall.interaction.n, 0);
        assert_eq!(curved_overall.interaction.mean, None);
        assert_eq!(curved_overall.d, None);

        // Straight overall SE has a positive effect (interaction higher).
        let se_straight = report
            .effect_sizes
            .iter()
            .find(|e| e.metric == "se" && e.condition == CurvatureClass::Straight)
            .unwrap();
        assert!(se_straight.d > 0.0);
        assert_eq!(se_straight.n_interaction, 3);
        assert_eq!(se_straight.n_baseline, 3);
        // Curved produced no effect-size rows.
        assert!(report.effect_sizes.iter().all(|e| e.condition == CurvatureClass::Straight));
    }

    #[test]
    fn thin_buckets_keep_counts_but_null_statistics() {
        let cfg = small_cfg();
        let inter = vec![
            metric_at(10.0, 0.6, 4.0, CurvatureClass::Straight),
            metric_at(40.0, 0.7, 5.0, CurvatureClass::Straight),
            metric_at(41.0, 0.9, 5.5, CurvatureClass::Straight),
        ];
        let base = vec![
            metric_at(40.5, 0.3, 1.0, CurvatureClass::Straight),
            metric_at(42.0, 0.4, 2.0, CurvatureClass::Straight),
        ];
        let report = build_report(&inter, &base, &cfg);
        let first_bucket = report
            .cells
            .iter()
            .find(|c| c.metric == "se" && c.condition == CurvatureClass::Straight && c.bucket == "[0,30)")
            .unwrap();
        assert_eq!(first_bucket.interaction.n, 1);
        assert_eq!(first_bucket.interaction.mean, None);
        assert_eq!(first_bucket.baseline.n, 0);
        assert_eq!(first_bucket.d, None);

        let mid_bucket = report
            .cells
            .iter()
            .find(|c| c.metric == "se" && c.condition == CurvatureClass::Straight && c.bucket == "[30,60)")
            .unwrap();
        assert_eq!(mid_bucket.interaction.n, 2);
        assert!(mid_bucket.interaction.mean.is_some());
        assert!(mid_bucket.d.is_some());
    }

    #[test]
    fn zero_variance_cells_carry_stats_but_no_effect() {
        let cfg = small_cfg();
        let inter = vec![
            metric_at(10.0, 0.5, 4.0, CurvatureClass::Straight),
            metric_at(11.0, 0.5, 4.0, CurvatureClass::Straight),
        ];
        let base = vec![
            metric_at(10.0, 0.3, 4.0, CurvatureClass::Straight),
            metric_at(11.0, 0.3, 4.0, CurvatureClass::Straight),
        ];
        let report = build_report(&inter, &base, &cfg);
        let se_overall = report
            .cells
            .iter()
            .find(|c| c.metric == "se" && c.condition == CurvatureClass::Straight && c.bucket == "overall")
            .unwrap();
        assert_eq!(se_overall.interaction.mean, Some(0.5));
        assert_eq!(se_overall.d, None); // zero pooled variance
        assert!(report.effect_sizes.iter().all(|e| e.metric != "se"));
    }

    #[test]
    fn csv_has_one_row_per_cell_and_group() {
        let cfg = small_cfg();
        let inter = vec![metric_at(10.0, 0.6, 4.0, CurvatureClass::Straight)];
        let base = vec![metric_at(12.0, 0.3, 1.0, CurvatureClass::Straight)];
        let report = build_report(&inter, &base, &cfg);
        let csv = report_to_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,condition,bucket,group,mean,sd,n");
        assert_eq!(lines.len(), 1 + report.cells.len() * 2);
        assert!(lines[1].starts_with("se,straight,overall,interaction,"));
        // Null statistics render as empty fields.
        assert!(lines[1].ends_with(",,1"));
    }

    #[test]
    fn plot_series_cover_buckets_for_both_groups() {
        let cfg = small_cfg();
        let inter = vec![
            metric_at(10.0, 0.6, 4.0, CurvatureClass::Straight),
            metric_at(12.0, 0.7, 4.5, CurvatureClass::Straight),
        ];
        let base = vec![
            metric_at(11.0, 0.3, 1.0, CurvatureClass::Straight),
            metric_at(13.0, 0.4, 1.5, CurvatureClass::Straight),
        ];
        let report = build_report(&inter, &base, &cfg);
        let series = plot_series_csv(&report);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].0, "se");
        assert_eq!(series[1].0, "swrr_2deg");
        for (_, csv) in &series {
            let lines: Vec<&str> = csv.lines().collect();
            assert_eq!(lines[0], "bucket,group,mean,sd,n");
            // 3 buckets × 2 groups
            assert_eq!(lines.len(), 1 + 3 * 2);
        }
        // Without a 2° gap the reversal-rate series is omitted.
        let cfg5 = PipelineConfig { swrr_gaps: vec![5.0], ..small_cfg() };
        let report5 = build_report(&inter, &base, &cfg5);
        assert_eq!(plot_series_csv(&report5).len(), 1);
    }
}
