//! Log parsing, grid regularization, assistance-interval normalization,
//! and drive assembly.
//!
//! Wire schema (JSONL, one object per line; CSV carries the same fields
//! as columns `t,kind,value,feature,active,element,gesture` with unused
//! cells empty):
//!
//! ```text
//! {"t": <s>, "kind": "steer", "value": <deg>}
//! {"t": <s>, "kind": "speed", "value": <km/h>}
//! {"t": <s>, "kind": "adas",  "feature": "cruise_control"|"steering_assist", "active": true|false}
//! {"t": <s>, "kind": "ui",    "element": <string>, "gesture": "tap"|"drag"|"swipe"|"other"}
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AdasFeature, AdasInterval, Drive, Gesture, UIEvent, UniformTrace, Violation,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable source: {0}")]
    UnreadableSource(#[from] std::io::Error),
    #[error("unknown log format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("drive `{0}` has no steering samples")]
    EmptyDrive(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl LogFormat {
    /// Infers the format from a file extension.
    pub fn from_path(path: &Path) -> Result<LogFormat, IngestError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => Ok(LogFormat::Jsonl),
            Some("csv") => Ok(LogFormat::Csv),
            other => Err(IngestError::UnknownFormat(other.unwrap_or("<none>").to_string())),
        }
    }
}

/// One temporal fact from a drive log.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub t: f64,
    pub payload: RecordPayload,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecordPayload {
    /// Steering wheel angle, degrees.
    Steer(f64),
    /// Vehicle speed, km/h.
    Speed(f64),
    /// Assistance feature switched on or off.
    Adas { feature: AdasFeature, active: bool },
    /// Touchscreen interaction.
    Ui { element: String, gesture: Gesture },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WireKind {
    Steer,
    Speed,
    Adas,
    Ui,
}

/// Serde bridge shared by the JSONL and CSV readers; optional fields stay
/// absent for kinds that do not use them.
#[derive(Debug, Serialize, Deserialize)]
struct WireRecord {
    t: f64,
    kind: WireKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<AdasFeature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    element: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gesture: Option<Gesture>,
}

impl TryFrom<WireRecord> for RawRecord {
    type Error = String;

    fn try_from(w: WireRecord) -> Result<RawRecord, String> {
        if !w.t.is_finite() {
            return Err(format!("non-finite t: {}", w.t));
        }
        let payload = match w.kind {
            WireKind::Steer | WireKind::Speed => {
                let v = w.value.ok_or("missing `value`")?;
                if !v.is_finite() {
                    return Err(format!("non-finite value: {v}"));
                }
                if w.kind == WireKind::Steer {
                    RecordPayload::Steer(v)
                } else {
                    RecordPayload::Speed(v)
                }
            }
            WireKind::Adas => RecordPayload::Adas {
                feature: w.feature.ok_or("missing `feature`")?,
                active: w.active.ok_or("missing `active`")?,
            },
            WireKind::Ui => {
                let element = w.element.ok_or("missing `element`")?;
                if element.is_empty() {
                    return Err("empty `element`".to_string());
                }
                RecordPayload::Ui { element, gesture: w.gesture.ok_or("missing `gesture`")? }
            }
        };
        Ok(RawRecord { t: w.t, payload })
    }
}

impl From<&RawRecord> for WireRecord {
    fn from(r: &RawRecord) -> WireRecord {
        let mut w = WireRecord {
            t: r.t,
            kind: WireKind::Steer,
            value: None,
            feature: None,
            active: None,
            element: None,
            gesture: None,
        };
        match &r.payload {
            RecordPayload::Steer(v) => {
                w.kind = WireKind::Steer;
                w.value = Some(*v);
            }
            RecordPayload::Speed(v) => {
                w.kind = WireKind::Speed;
                w.value = Some(*v);
            }
            RecordPayload::Adas { feature, active } => {
                w.kind = WireKind::Adas;
                w.feature = Some(*feature);
                w.active = Some(*active);
            }
            RecordPayload::Ui { element, gesture } => {
                w.kind = WireKind::Ui;
                w.element = Some(element.clone());
                w.gesture = Some(*gesture);
            }
        }
        w
    }
}

/// A line the parser refused, with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: u64,
    pub reason: String,
}

/// Parsed log: well-formed records in file order plus the reject report.
#[derive(Debug, Default)]
pub struct ParsedLog {
    pub records: Vec<RawRecord>,
    pub rejects: Vec<RejectedLine>,
}

/// Reads a drive log. Malformed lines land in the reject report and never
/// abort the parse; only I/O trouble does.
pub fn read_drive_log<R: Read>(source: R, format: LogFormat) -> Result<ParsedLog, IngestError> {
    match format {
        LogFormat::Jsonl => read_jsonl(source),
        LogFormat::Csv => read_csv(source),
    }
}

/// Reads a drive log from a file, inferring the format from the extension.
pub fn read_drive_log_path(path: &Path) -> Result<ParsedLog, IngestError> {
    let format = LogFormat::from_path(path)?;
    read_drive_log(std::fs::File::open(path)?, format)
}

fn read_jsonl<R: Read>(source: R) -> Result<ParsedLog, IngestError> {
    let mut log = ParsedLog::default();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let lineno = idx as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<WireRecord>(&line) {
            Ok(w) => match RawRecord::try_from(w) {
                Ok(r) => log.records.push(r),
                Err(reason) => log.rejects.push(RejectedLine { line: lineno, reason }),
            },
            Err(e) => log.rejects.push(RejectedLine { line: lineno, reason: e.to_string() }),
        }
    }
    Ok(log)
}

fn read_csv<R: Read>(source: R) -> Result<ParsedLog, IngestError> {
    let mut log = ParsedLog::default();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(io_from_csv(e)),
        Err(e) => {
            log.rejects.push(RejectedLine { line: 1, reason: e.to_string() });
            return Ok(log);
        }
    };
    for rec in rdr.records() {
        match rec {
            Ok(r) => {
                let lineno = r.position().map(|p| p.line()).unwrap_or(0);
                match r.deserialize::<WireRecord>(Some(&headers)) {
                    Ok(w) => match RawRecord::try_from(w) {
                        Ok(raw) => log.records.push(raw),
                        Err(reason) => log.rejects.push(RejectedLine { line: lineno, reason }),
                    },
                    Err(e) => {
                        log.rejects.push(RejectedLine { line: lineno, reason: e.to_string() })
                    }
                }
            }
            Err(e) if e.is_io_error() => return Err(io_from_csv(e)),
            Err(e) => {
                let lineno = e.position().map(|p| p.line()).unwrap_or(0);
                log.rejects.push(RejectedLine { line: lineno, reason: e.to_string() });
            }
        }
    }
    Ok(log)
}

fn io_from_csv(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::UnreadableSource(io),
        other => IngestError::UnreadableSource(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Puts irregular `(t, value)` records onto uniform grids at
/// `nominal_rate`. Consecutive records more than `max_gap` seconds apart
/// split the trace into separate segments — long outages are never bridged
/// by interpolation, and the grid never extends past a segment's
/// first/last record. Grid times are pure index math
/// (`start + i / rate`), so there is no cumulative drift, and a record
/// lying exactly on a grid point is copied bit-for-bit.
pub fn regularize_trace(
    records: &[(f64, f64)],
    nominal_rate: f64,
    max_gap: f64,
) -> Vec<UniformTrace> {
    debug_assert!(records.windows(2).all(|w| w[0].0 <= w[1].0), "records must be sorted by t");
    let mut segments = Vec::new();
    let mut seg_start = 0usize;
    for i in 0..=records.len() {
        let split = i == records.len() || (i > 0 && records[i].0 - records[i - 1].0 > max_gap);
        if !split {
            continue;
        }
        if i > seg_start {
            segments.push(resample_segment(&records[seg_start..i], nominal_rate));
        }
        seg_start = i;
    }
    segments
}

fn resample_segment(seg: &[(f64, f64)], rate: f64) -> UniformTrace {
    let start = seg[0].0;
    let last = seg[seg.len() - 1].0;
    let count = ((last - start) * rate + 1e-9).floor() as usize + 1;
    let mut values = Vec::with_capacity(count);
    let mut j = 0usize;
    for i in 0..count {
        let ti = start + i as f64 / rate;
        while j + 1 < seg.len() && seg[j + 1].0 <= ti {
            j += 1;
        }
        if j + 1 == seg.len() || ti <= seg[j].0 {
            // At or past the last record (float dust), or exactly on a
            // record: take the record value unchanged.
            values.push(seg[j].1);
        } else {
            let (t0, v0) = seg[j];
            let (t1, v1) = seg[j + 1];
            values.push(v0 + (ti - t0) / (t1 - t0) * (v1 - v0));
        }
    }
    UniformTrace::new(start, rate, values)
}

/// Turns on-change assistance flags into closed, merged intervals per
/// feature, clipped to the drive span.
///
/// A repeated activation is folded into the open interval; an activation
/// never followed by a deactivation runs to the span end; a deactivation
/// with no prior activation is read conservatively as active since the
/// span start.
pub fn normalize_adas(records: &[RawRecord], span: (f64, f64)) -> Vec<AdasInterval> {
    debug_assert!(records.windows(2).all(|w| w[0].t <= w[1].t), "records must be sorted by t");
    let mut open: std::collections::BTreeMap<AdasFeature, f64> = Default::default();
    let mut raw: Vec<(AdasFeature, f64, f64)> = Vec::new();
    for r in records {
        let RecordPayload::Adas { feature, active } = &r.payload else {
            continue;
        };
        if *active {
            open.entry(*feature).or_insert(r.t);
        } else {
            let start = open.remove(feature).unwrap_or(span.0);
            raw.push((*feature, start, r.t));
        }
    }
    for (feature, start) in open {
        raw.push((feature, start, span.1));
    }

    // Clip, merge per feature (closed intervals: touching fuses), then
    // order canonically by (start, feature).
    raw.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<AdasInterval> = Vec::new();
    for (feature, s, e) in raw {
        let (s, e) = (s.max(span.0), e.min(span.1));
        if s > e {
            continue;
        }
        match merged.last_mut() {
            Some(last) if last.feature == feature && s <= last.end => {
                last.end = last.end.max(e);
            }
            _ => merged.push(AdasInterval { feature, start: s, end: e }),
        }
    }
    merged.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.feature.cmp(&b.feature)));
    merged
}

/// Knobs for drive assembly.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Target grid rate, Hz.
    pub nominal_rate: f64,
    /// Largest record gap interpolation may bridge, seconds.
    pub max_gap: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { nominal_rate: 5.0, max_gap: 1.0 }
    }
}

/// A validation finding attributed to one assembled drive.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveViolation {
    pub drive_id: String,
    pub violation: Violation,
}

/// Drives assembled from one log plus everything that fell by the wayside.
#[derive(Debug)]
pub struct Assembly {
    pub drives: Vec<Drive>,
    pub violations: Vec<DriveViolation>,
    /// UI events that fell into steering outages and belong to no drive.
    pub dropped_ui_events: usize,
}

/// Routes records by kind, regularizes steering onto the grid, resamples
/// speed onto the *steering* grid (so windowed statistics share index
/// arithmetic), attaches UI events and assistance intervals to their
/// containing segment, and validates the result. A steering outage longer
/// than `opts.max_gap` splits the log into several drives with suffixed
/// ids so every Drive holds one contiguous trace.
pub fn assemble_drives(
    mut records: Vec<RawRecord>,
    drive_id: &str,
    opts: &IngestOptions,
) -> Result<Assembly, IngestError> {
    records.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut steer: Vec<(f64, f64)> = Vec::new();
    let mut speed: Vec<(f64, f64)> = Vec::new();
    let mut adas: Vec<RawRecord> = Vec::new();
    let mut ui: Vec<UIEvent> = Vec::new();
    for r in records {
        match r.payload {
            RecordPayload::Steer(v) => steer.push((r.t, v)),
            RecordPayload::Speed(v) => speed.push((r.t, v)),
            RecordPayload::Adas { .. } => adas.push(r),
            RecordPayload::Ui { ref element, gesture } => {
                ui.push(UIEvent { t: r.t, element: element.clone(), gesture })
            }
        }
    }
    if steer.is_empty() {
        return Err(IngestError::EmptyDrive(drive_id.to_string()));
    }

    let segments = regularize_trace(&steer, opts.nominal_rate, opts.max_gap);
    let speed_sampler = SpeedSampler::new(&speed, opts.max_gap);

    let mut assembly =
        Assembly { drives: Vec::new(), violations: Vec::new(), dropped_ui_events: ui.len() };
    let multi = segments.len() > 1;
    for (i, steering) in segments.into_iter().enumerate() {
        let id = if multi { format!("{drive_id}-{i}") } else { drive_id.to_string() };
        let (lo, hi) = steering.span();
        let speed_values: Vec<f64> =
            (0..steering.len()).map(|k| speed_sampler.sample(steering.time_at(k))).collect();
        let events: Vec<UIEvent> =
            ui.iter().filter(|e| e.t >= lo && e.t <= hi).cloned().collect();
        assembly.dropped_ui_events -= events.len();
        let drive = Drive {
            drive_id: id.clone(),
            speed: UniformTrace::new(steering.start_time, steering.sample_rate, speed_values),
            steering,
            ui_events: events,
            adas: normalize_adas(&adas, (lo, hi)),
        };
        for violation in crate::model::validate_drive(&drive) {
            assembly.violations.push(DriveViolation { drive_id: id.clone(), violation });
        }
        assembly.drives.push(drive);
    }
    Ok(assembly)
}

/// Interpolates speed records onto arbitrary query times: linear within a
/// record run, clamped to the nearest record across outages and beyond
/// coverage (fabricating a ramp across a gap would be worse than holding
/// the last known speed). No records at all sample as 0.
struct SpeedSampler<'a> {
    records: &'a [(f64, f64)],
    /// Run index per record; a new run starts after a gap > max_gap.
    run: Vec<u32>,
}

impl<'a> SpeedSampler<'a> {
    fn new(records: &'a [(f64, f64)], max_gap: f64) -> Self {
        let mut run = Vec::with_capacity(records.len());
        let mut current = 0u32;
        for i in 0..records.len() {
            if i > 0 && records[i].0 - records[i - 1].0 > max_gap {
                current += 1;
            }
            run.push(current);
        }
        SpeedSampler { records, run }
    }

    fn sample(&self, t: f64) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let i = self.records.partition_point(|r| r.0 <= t);
        if i == 0 {
            return self.records[0].1;
        }
        if i == self.records.len() {
            return self.records[i - 1].1;
        }
        let (t0, v0) = self.records[i - 1];
        let (t1, v1) = self.records[i];
        if self.run[i - 1] == self.run[i] {
            v0 + (t - t0) / (t1 - t0) * (v1 - v0)
        } else if t - t0 <= t1 - t {
            v0
        } else {
            v1
        }
    }
}

/// Serializes a drive back into wire records: grid samples for steering
/// and speed, on/off flag pairs for assistance intervals, and the UI
/// events, all sorted by time. Re-assembling them reproduces the drive
/// bit for bit.
pub fn drive_to_records(drive: &Drive) -> Vec<RawRecord> {
    let mut out = Vec::with_capacity(2 * drive.steering.len() + drive.ui_events.len());
    for (i, &v) in drive.steering.values.iter().enumerate() {
        out.push(RawRecord { t: drive.steering.time_at(i), payload: RecordPayload::Steer(v) });
    }
    for (i, &v) in drive.speed.values.iter().enumerate() {
        out.push(RawRecord { t: drive.speed.time_at(i), payload: RecordPayload::Speed(v) });
    }
    for iv in &drive.adas {
        out.push(RawRecord {
            t: iv.start,
            payload: RecordPayload::Adas { feature: iv.feature, active: true },
        });
        out.push(RawRecord {
            t: iv.end,
            payload: RecordPayload::Adas { feature: iv.feature, active: false },
        });
    }
    for e in &drive.ui_events {
        out.push(RawRecord {
            t: e.t,
            payload: RecordPayload::Ui { element: e.element.clone(), gesture: e.gesture },
        });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Writes records as JSONL. Floats go through the shortest round-tripping
/// decimal form, so a write/read cycle preserves them exactly.
pub fn write_records_jsonl<W: Write>(mut w: W, records: &[RawRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &WireRecord::from(r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
