//! Interaction-sequence extraction, assistance filtering, and stratified
//! sampling of no-interaction baseline sequences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::linear_quantile;
use crate::model::{AdasInterval, Drive, PipelineConfig, Sequence, SequenceKind};

/// Greedy left-to-right grouping of UI events: an event joins the open
/// sequence iff its gap to the previous event is strictly under
/// `cfg.t_max`. Core bounds are the first/last event times; the window
/// adds `cfg.t_buffer` each side, clipped to the drive span (and flagged).
pub fn extract_interaction_sequences(drive: &Drive, cfg: &PipelineConfig) -> Vec<Sequence> {
    let span = drive.span();
    let mut out = Vec::new();
    let mut group: Vec<crate::model::UIEvent> = Vec::new();
    let close =
        |group: &mut Vec<crate::model::UIEvent>, out: &mut Vec<Sequence>| {
            if group.is_empty() {
                return;
            }
            let core_start = group.first().unwrap().t;
            let core_end = group.last().unwrap().t;
            let raw_ws = core_start - cfg.t_buffer;
            let raw_we = core_end + cfg.t_buffer;
            out.push(Sequence {
                drive_id: drive.drive_id.clone(),
                kind: SequenceKind::Interaction,
                core_start,
                core_end,
                window_start: raw_ws.max(span.0),
                window_end: raw_we.min(span.1),
                events: std::mem::take(group),
                clipped: raw_ws < span.0 || raw_we > span.1,
            });
        };
    for ev in &drive.ui_events {
        if let Some(prev) = group.last() {
            if ev.t - prev.t >= cfg.t_max {
                close(&mut group, &mut out);
            }
        }
        group.push(ev.clone());
    }
    close(&mut group, &mut out);
    out
}

/// Keeps exactly the sequences whose buffered window intersects no
/// assistance interval; a shared endpoint counts as an intersection.
pub fn filter_adas_active(sequences: Vec<Sequence>, adas: &[AdasInterval]) -> Vec<Sequence> {
    sequences
        .into_iter()
        .filter(|s| !adas.iter().any(|iv| iv.overlaps(s.window_start, s.window_end)))
        .collect()
}

/// Merges possibly-overlapping closed intervals into a disjoint ascending
/// list (touching intervals fuse).
fn merge_intervals(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for (s, e) in ivs {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Maximal sub-spans of the drive free of interaction windows and
/// assistance intervals: the complement, within the trace span, of the
/// union of every extracted interaction window (buffered, pre-filtering)
/// and every assistance interval.
pub fn eligible_baseline_spans(drive: &Drive, cfg: &PipelineConfig) -> Vec<(f64, f64)> {
    let (lo, hi) = drive.span();
    let mut blocked: Vec<(f64, f64)> = extract_interaction_sequences(drive, cfg)
        .iter()
        .map(|s| (s.window_start, s.window_end))
        .collect();
    blocked.extend(drive.adas.iter().map(|iv| (iv.start.max(lo), iv.end.min(hi))));
    let blocked = merge_intervals(blocked.into_iter().filter(|(s, e)| s <= e).collect());

    let mut out = Vec::new();
    let mut cursor = lo;
    for (s, e) in blocked {
        if s > cursor {
            out.push((cursor, s));
        }
        cursor = cursor.max(e);
    }
    if cursor < hi {
        out.push((cursor, hi));
    }
    out
}

/// Duration bins (decile edges of the interaction window durations) and
/// how many baselines each bin must receive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratificationPlan {
    /// Deduplicated decile edges, ascending; bin i spans
    /// [edge_i, edge_{i+1}). When every duration is identical the plan
    /// degenerates to one zero-width bin (the edge repeated).
    pub duration_bin_edges: Vec<f64>,
    /// Baselines owed per bin, copied from the interaction histogram.
    pub targets: Vec<usize>,
}

impl StratificationPlan {
    /// Builds the plan from interaction window durations.
    fn from_durations(durations: &[f64]) -> Self {
        let mut sorted = durations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut edges: Vec<f64> =
            (0..=10).map(|i| linear_quantile(&sorted, i as f64 / 10.0)).collect();
        edges.dedup();
        if edges.len() == 1 {
            let only = edges[0];
            edges.push(only);
        }
        let mut plan = StratificationPlan { duration_bin_edges: edges, targets: Vec::new() };
        plan.targets = vec![0; plan.n_bins()];
        for &d in durations {
            let bin = plan.bin_of(d);
            plan.targets[bin] += 1;
        }
        plan
    }

    pub fn n_bins(&self) -> usize {
        self.duration_bin_edges.len() - 1
    }

    /// Bin index of a duration; clamps below the first and above the last
    /// edge so assignment is total.
    pub fn bin_of(&self, duration: f64) -> usize {
        self.duration_bin_edges
            .partition_point(|e| *e <= duration)
            .saturating_sub(1)
            .min(self.n_bins() - 1)
    }

    /// `[low, high]` duration edges of bin `i`.
    pub fn bin_bounds(&self, i: usize) -> (f64, f64) {
        (self.duration_bin_edges[i], self.duration_bin_edges[i + 1])
    }
}

/// One duration bin that could not be filled from the eligible data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinShortfall {
    pub bin_index: usize,
    pub target: usize,
    pub sampled: usize,
}

/// Result of baseline sampling: the sequences drawn, the plan they were
/// drawn against, and any bins left short when eligibility ran out.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSample {
    pub sequences: Vec<Sequence>,
    pub plan: StratificationPlan,
    pub shortfalls: Vec<BinShortfall>,
}

/// A still-unused stretch of eligible time in one drive.
struct FreeSegment {
    drive_idx: usize,
    start: f64,
    end: f64,
}

impl FreeSegment {
    fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Samples no-interaction baseline windows matching the interaction
/// sequences' duration distribution at decile-histogram resolution.
///
/// Durations are drawn uniformly within each bin and placed uniformly over
/// the corpus's eligible free time, without replacement and without
/// overlap (used stretches are carved out as they go). The draw is fully
/// determined by `cfg.rng_seed` and runs single-threaded on purpose.
/// Bins that exhaust eligibility are reported as shortfalls alongside the
/// partial sample rather than aborting the run.
pub fn sample_baselines(
    corpus: &[Drive],
    interaction_seqs: &[Sequence],
    cfg: &PipelineConfig,
) -> BaselineSample {
    debug_assert!(!interaction_seqs.is_empty(), "need interaction sequences to build the plan");
    if interaction_seqs.is_empty() {
        return BaselineSample {
            sequences: Vec::new(),
            plan: StratificationPlan { duration_bin_edges: Vec::new(), targets: Vec::new() },
            shortfalls: Vec::new(),
        };
    }
    let durations: Vec<f64> = interaction_seqs.iter().map(Sequence::window_duration).collect();
    let plan = StratificationPlan::from_durations(&durations);

    // Free pool, in corpus order so the walk below is deterministic.
    let mut free: Vec<FreeSegment> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, d)| {
            eligible_baseline_spans(d, cfg)
                .into_iter()
                .map(move |(s, e)| FreeSegment { drive_idx: i, start: s, end: e })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sequences = Vec::new();
    let mut shortfalls = Vec::new();

    const DUST: f64 = 1e-12;
    for (bin, &target) in plan.targets.iter().enumerate() {
        let (lo, hi) = plan.bin_bounds(bin);
        let mut sampled = 0usize;
        while sampled < target {
            let cap = free.iter().map(FreeSegment::len).fold(0.0_f64, f64::max);
            if cap < lo {
                shortfalls.push(BinShortfall { bin_index: bin, target, sampled });
                break;
            }
            let hi_eff = hi.min(cap);
            let d = if lo < hi_eff { rng.random_range(lo..hi_eff) } else { lo };

            // Pick a start uniformly over all feasible positions: each
            // segment contributes an interval of length max(len − d, 0).
            let weights: Vec<f64> = free.iter().map(|s| (s.len() - d).max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let seg_idx;
            let offset;
            if total > 0.0 {
                let mut r = rng.random_range(0.0..total);
                let mut found = None;
                for (i, &w) in weights.iter().enumerate() {
                    if w > 0.0 && r < w {
                        found = Some((i, r));
                        break;
                    }
                    r -= w;
                }
                // Float round-off can push r past the final weight.
                let (i, off) =
                    found.unwrap_or_else(|| (weights.iter().rposition(|&w| w > 0.0).unwrap(), 0.0));
                seg_idx = i;
                offset = off;
            } else {
                // Only exact fits remain; take the first one at its start.
                seg_idx = free
                    .iter()
                    .position(|s| s.len() >= d)
                    .expect("cap >= d guarantees a fitting segment");
                offset = 0.0;
            }

            let seg = free.swap_remove(seg_idx);
            let ws = seg.start + offset;
            let we = ws + d;
            if ws - seg.start > DUST {
                free.push(FreeSegment { drive_idx: seg.drive_idx, start: seg.start, end: ws });
            }
            if seg.end - we > DUST {
                free.push(FreeSegment { drive_idx: seg.drive_idx, start: we, end: seg.end });
            }

            let drive = &corpus[seg.drive_idx];
            let (core_start, core_end, clipped) = if d >= 2.0 * cfg.t_buffer {
                (ws + cfg.t_buffer, we - cfg.t_buffer, false)
            } else {
                let mid = (ws + we) / 2.0;
                (mid, mid, true)
            };
            sequences.push(Sequence {
                drive_id: drive.drive_id.clone(),
                kind: SequenceKind::Baseline,
                core_start,
                core_end,
                window_start: ws,
                window_end: we,
                events: Vec::new(),
                clipped,
            });
            sampled += 1;
        }
    }

    sequences.sort_by(|a, b| {
        a.drive_id.cmp(&b.drive_id).then(a.core_start.total_cmp(&b.core_start))
    });
    BaselineSample { sequences, plan, shortfalls }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdasFeature, Gesture, UIEvent, UniformTrace};

    fn ev(t: f64) -> UIEvent {
        UIEvent { t, element: "btn".into(), gesture: Gesture::Tap }
    }

    /// A quiet drive spanning [0, secs] at 5 Hz with the given events.
    fn drive(secs: f64, events: Vec<UIEvent>, adas: Vec<AdasInterval>) -> Drive {
        let n = (secs * 5.0) as usize + 1;
        Drive {
            drive_id: "d0".into(),
            steering: UniformTrace::new(0.0, 5.0, vec![0.0; n]),
            speed: UniformTrace::new(0.0, 5.0, vec![50.0; n]),
            ui_events: events,
            adas,
        }
    }

    fn cc(start: f64, end: f64) -> AdasInterval {
        AdasInterval { feature: AdasFeature::CruiseControl, start, end }
    }

    // ---- extract_interaction_sequences ------------------------------------

    #[test]
    fn groups_split_on_ten_second_gaps() {
        let d = drive(200.0, vec![ev(100.0), ev(104.0), ev(112.0), ev(130.0)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        assert_eq!(seqs.len(), 2);
        assert_eq!((seqs[0].core_start, seqs[0].core_end), (100.0, 112.0));
        assert_eq!((seqs[0].window_start, seqs[0].window_end), (98.0, 114.0));
        assert_eq!(seqs[0].n_events(), 3);
        assert!(!seqs[0].clipped);
        assert_eq!((seqs[1].core_start, seqs[1].core_end), (130.0, 130.0));
        assert_eq!((seqs[1].window_start, seqs[1].window_end), (128.0, 132.0));
        assert_eq!(seqs[1].n_events(), 1);
    }

    #[test]
    fn gap_of_exactly_t_max_starts_a_new_sequence() {
        let d = drive(60.0, vec![ev(5.0), ev(15.0)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        assert_eq!(seqs.len(), 2);
        let d2 = drive(60.0, vec![ev(5.0), ev(14.999)], vec![]);
        assert_eq!(extract_interaction_sequences(&d2, &PipelineConfig::default()).len(), 1);
    }

    #[test]
    fn single_event_gets_a_buffered_window() {
        let d = drive(60.0, vec![ev(5.0)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        assert_eq!(seqs.len(), 1);
        assert_eq!((seqs[0].core_start, seqs[0].core_end), (5.0, 5.0));
        assert_eq!((seqs[0].window_start, seqs[0].window_end), (3.0, 7.0));
        assert!(!seqs[0].clipped);
    }

    #[test]
    fn windows_clip_to_the_drive_span() {
        let d = drive(60.0, vec![ev(1.0), ev(59.5)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        assert_eq!(seqs.len(), 2);
        assert_eq!((seqs[0].window_start, seqs[0].window_end), (0.0, 3.0));
        assert!(seqs[0].clipped);
        assert_eq!((seqs[1].window_start, seqs[1].window_end), (57.5, 60.0));
        assert!(seqs[1].clipped);
    }

    #[test]
    fn duplicate_timestamps_stay_in_one_sequence() {
        let d = drive(60.0, vec![ev(10.0), ev(10.0), ev(10.0)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].n_events(), 3);
    }

    #[test]
    fn no_events_means_no_sequences() {
        let d = drive(60.0, vec![], vec![]);
        assert!(extract_interaction_sequences(&d, &PipelineConfig::default()).is_empty());
    }

    #[test]
    fn cores_are_sorted_and_disjoint() {
        let times: Vec<f64> = vec![3.0, 4.0, 30.0, 31.0, 90.0, 95.0, 140.0];
        let d = drive(200.0, times.into_iter().map(ev).collect(), vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        for pair in seqs.windows(2) {
            assert!(pair[0].core_start <= pair[1].core_start);
            assert!(pair[0].core_end < pair[1].core_start);
        }
    }

    // ---- filter_adas_active ------------------------------------------------

    #[test]
    fn adas_overlap_drops_sequences_including_touching_endpoints() {
        let d = drive(60.0, vec![ev(15.0)], vec![]);
        let seqs = extract_interaction_sequences(&d, &PipelineConfig::default());
        // window is [13,17]
        assert_eq!(filter_adas_active(seqs.clone(), &[cc(30.0, 40.0)]).len(), 1);
        assert_eq!(filter_adas_active(seqs.clone(), &[cc(15.0, 16.0)]).len(), 0);
        assert_eq!(filter_adas_active(seqs.clone(), &[cc(17.0, 25.0)]).len(), 0); // touch
        assert_eq!(filter_adas_active(seqs, &[cc(0.0, 13.0)]).len(), 0); // touch
    }

    // ---- eligible_baseline_spans --------------------------------------------

    #[test]
    fn eligibility_is_the_complement_of_windows_and_adas() {
        let d = drive(100.0, vec![ev(50.0)], vec![]);
        let cfg = PipelineConfig::default();
        // interaction window [48,52]
        assert_eq!(eligible_baseline_spans(&d, &cfg), vec![(0.0, 48.0), (52.0, 100.0)]);

        let d2 = drive(100.0, vec![ev(50.0)], vec![cc(70.0, 80.0)]);
        assert_eq!(
            eligible_baseline_spans(&d2, &cfg),
            vec![(0.0, 48.0), (52.0, 70.0), (80.0, 100.0)]
        );

        let quiet = drive(100.0, vec![], vec![]);
        assert_eq!(eligible_baseline_spans(&quiet, &cfg), vec![(0.0, 100.0)]);

        let covered = drive(100.0, vec![], vec![cc(0.0, 100.0)]);
        assert!(eligible_baseline_spans(&covered, &cfg).is_empty());
    }

    #[test]
    fn overlapping_blockers_merge_before_complementing() {
        let d = drive(100.0, vec![ev(50.0)], vec![cc(51.0, 60.0), cc(58.0, 65.0)]);
        let cfg = PipelineConfig::default();
        // window [48,52] fuses with [51,65]
        assert_eq!(eligible_baseline_spans(&d, &cfg), vec![(0.0, 48.0), (65.0, 100.0)]);
    }

    // ---- stratification plan -------------------------------------------------

    #[test]
    fn plan_bins_match_the_duration_histogram() {
        let durations = [5.0, 5.0, 5.0, 5.0, 5.0, 49.0];
        let plan = StratificationPlan::from_durations(&durations);
        assert_eq!(plan.duration_bin_edges, vec![5.0, 27.0, 49.0]);
        assert_eq!(plan.targets, vec![5, 1]);
        assert_eq!(plan.bin_of(5.0), 0);
        assert_eq!(plan.bin_of(26.9), 0);
        assert_eq!(plan.bin_of(27.0), 1);
        assert_eq!(plan.bin_of(49.0), 1); // top edge clamps into the last bin
        assert_eq!(plan.bin_of(3.0), 0); // below-range clamps up
        assert_eq!(plan.bin_of(60.0), 1); // above-range clamps down
    }

    #[test]
    fn identical_durations_collapse_to_one_bin() {
        let plan = StratificationPlan::from_durations(&[8.0; 12]);
        assert_eq!(plan.duration_bin_edges, vec![8.0, 8.0]);
        assert_eq!(plan.targets, vec![12]);
        assert_eq!(plan.bin_of(8.0), 0);
    }

    // ---- sample_baselines ------------------------------------------------------

    /// Hand-built interaction sequence of a given window duration (used
    /// only for its duration, so the bounds are arbitrary).
    fn interaction_of(duration: f64) -> Sequence {
        Sequence {
            drive_id: "src".into(),
            kind: SequenceKind::Interaction,
            core_start: 1000.0 + 2.0,
            core_end: 1000.0 + duration - 2.0,
            window_start: 1000.0,
            window_end: 1000.0 + duration,
            events: vec![ev(1000.0 + 2.0)],
            clipped: false,
        }
    }

    #[test]
    fn abundant_corpus_fills_every_bin_exactly() {
        let corpus: Vec<Drive> = (0..4)
            .map(|i| {
                let mut d = drive(2000.0, vec![], vec![]);
                d.drive_id = format!("d{i}");
                d
            })
            .collect();
        let interactions: Vec<Sequence> =
            (0..30).map(|i| interaction_of(4.0 + (i % 10) as f64)).collect();
        let cfg = PipelineConfig::default();
        let sample = sample_baselines(&corpus, &interactions, &cfg);

        assert!(sample.shortfalls.is_empty());
        assert_eq!(sample.sequences.len(), interactions.len());
        // Per-bin counts match the plan.
        let mut counts = vec![0usize; sample.plan.n_bins()];
        for s in &sample.sequences {
            assert_eq!(s.kind, SequenceKind::Baseline);
            assert_eq!(s.n_events(), 0);
            counts[sample.plan.bin_of(s.window_duration())] += 1;
        }
        assert_eq!(counts, sample.plan.targets);
        // No two baselines overlap (checked per drive).
        let mut by_drive: std::collections::BTreeMap<&str, Vec<(f64, f64)>> = Default::default();
        for s in &sample.sequences {
            by_drive.entry(&s.drive_id).or_default().push((s.window_start, s.window_end));
        }
        for (_, mut spans) in by_drive {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in spans.windows(2) {
                assert!(pair[0].1 <= pair[1].0, "overlap: {pair:?}");
            }
        }
        // Full buffers were available, so cores are unclipped and inset.
        for s in &sample.sequences {
            if s.window_duration() >= 4.0 {
                assert!(!s.clipped);
                assert_eq!(s.core_start, s.window_start + 2.0);
                assert_eq!(s.core_end, s.window_end - 2.0);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_sample_exactly() {
        let corpus: Vec<Drive> = vec![drive(3000.0, vec![], vec![])];
        let interactions: Vec<Sequence> =
            (0..25).map(|i| interaction_of(4.0 + (i % 7) as f64 * 3.0)).collect();
        let cfg = PipelineConfig::default();
        let a = sample_baselines(&corpus, &interactions, &cfg);
        let b = sample_baselines(&corpus, &interactions, &cfg);
        assert_eq!(a, b);
        let other = PipelineConfig { rng_seed: 1, ..PipelineConfig::default() };
        let c = sample_baselines(&corpus, &interactions, &other);
        assert_ne!(a.sequences, c.sequences);
    }

    #[test]
    fn short_eligibility_reports_a_shortfall_for_the_long_bin_only() {
        // Eligible stretches are six 20 s chunks; the [27,49] bin cannot fit.
        let adas = vec![
            cc(20.0, 30.0),
            cc(50.0, 60.0),
            cc(80.0, 90.0),
            cc(110.0, 120.0),
            cc(140.0, 150.0),
            cc(170.0, 200.0),
        ];
        let corpus = vec![drive(200.0, vec![], adas)];
        let mut interactions: Vec<Sequence> = (0..5).map(|_| interaction_of(5.0)).collect();
        interactions.push(interaction_of(49.0));
        let cfg = PipelineConfig::default();
        let sample = sample_baselines(&corpus, &interactions, &cfg);

        assert_eq!(sample.plan.duration_bin_edges, vec![5.0, 27.0, 49.0]);
        assert_eq!(
            sample.shortfalls,
            vec![BinShortfall { bin_index: 1, target: 1, sampled: 0 }]
        );
        assert_eq!(sample.sequences.len(), 5);
        for s in &sample.sequences {
            let d = s.window_duration();
            assert!((5.0..=20.0).contains(&d), "duration {d} outside feasible range");
        }
    }

    #[test]
    fn baselines_stay_clear_of_interaction_windows_and_adas() {
        // The corpus drives themselves carry events and assistance spans.
        let mut d0 = drive(600.0, vec![ev(100.0), ev(104.0), ev(300.0)], vec![cc(400.0, 450.0)]);
        d0.drive_id = "a".into();
        let mut d1 = drive(600.0, vec![ev(50.0)], vec![]);
        d1.drive_id = "b".into();
        let cfg = PipelineConfig::default();
        let mut interactions = extract_interaction_sequences(&d0, &cfg);
        interactions.extend(extract_interaction_sequences(&d1, &cfg));
        let corpus = vec![d0, d1];
        let sample = sample_baselines(&corpus, &interactions, &cfg);
        assert!(sample.shortfalls.is_empty());

        for s in &sample.sequences {
            let drive = corpus.iter().find(|d| d.drive_id == s.drive_id).unwrap();
            for iv in &drive.adas {
                assert!(!iv.overlaps(s.window_start, s.window_end));
            }
            for is in interactions.iter().filter(|i| i.drive_id == s.drive_id) {
                assert!(
                    s.window_end <= is.window_start || is.window_end <= s.window_start,
                    "baseline {:?} overlaps interaction window [{},{}]",
                    (s.window_start, s.window_end),
                    is.window_start,
                    is.window_end
                );
            }
        }
    }

    #[test]
    fn sub_buffer_durations_get_midpoint_cores() {
        let corpus = vec![drive(1000.0, vec![], vec![])];
        // All interactions 3 s long (< 2·t_buffer): every baseline window
        // is too short for full buffers.
        let interactions: Vec<Sequence> = (0..6).map(|_| interaction_of(3.0)).collect();
        let cfg = PipelineConfig::default();
        let sample = sample_baselines(&corpus, &interactions, &cfg);
        assert!(sample.shortfalls.is_empty());
        assert_eq!(sample.sequences.len(), 6);
        for s in &sample.sequences {
            assert!(s.clipped);
            assert_eq!(s.core_start, s.core_end);
            let mid = (s.window_start + s.window_end) / 2.0;
            assert!((s.core_start - mid).abs() < 1e-9);
        }
    }

    #[test]
    fn output_is_sorted_by_drive_then_core_start() {
        let mut d0 = drive(1500.0, vec![], vec![]);
        d0.drive_id = "zeta".into();
        let mut d1 = drive(1500.0, vec![], vec![]);
        d1.drive_id = "alpha".into();
        let corpus = vec![d0, d1];
        let interactions: Vec<Sequence> =
            (0..20).map(|i| interaction_of(4.0 + i as f64)).collect();
        let sample = sample_baselines(&corpus, &interactions, &PipelineConfig::default());
        for pair in sample.sequences.windows(2) {
            let key = |s: &Sequence| (s.drive_id.clone(), s.core_start);
            assert!(key(&pair[0]) <= key(&pair[1]));
        }
    }
}
